#pragma once

#include <string_view>

namespace dapointr {

/// 0 = source (labelled), 1 = target (unlabelled).
enum class DomainLabel : int { source = 0, target = 1 };

constexpr double label_value(DomainLabel l) noexcept { return l == DomainLabel::target ? 1.0 : 0.0; }

constexpr std::string_view label_name(DomainLabel l) noexcept {
  return l == DomainLabel::target ? "target" : "source";
}

}  // namespace dapointr

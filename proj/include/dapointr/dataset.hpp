#pragma once

#include "dapointr/geometry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dapointr {

/// One labelled or unlabelled cloud of a benchmark split.
struct Sample {
  std::string id;        // file stem, "NNNN_category"
  std::string category;  // text after the first '_'
  PointCloud partial;
  std::optional<PointCloud> complete;
};

/// Loads `<dir>/partial/*` and, when present, the same stems from
/// `<dir>/complete/`. With `require_complete`, missing ground truth is an
/// error naming every id that lacks it. Partials are resampled to
/// `input_points` unless it is 0.
std::vector<Sample> load_split(const std::filesystem::path& dir, bool require_complete,
                               std::size_t input_points = 0);

/// Resolves a benchmark root to its target/eval split; other paths pass through.
std::filesystem::path resolve_eval_split(const std::filesystem::path& dir);

}  // namespace dapointr

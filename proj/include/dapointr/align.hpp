#pragma once

#include "dapointr/domain.hpp"
#include "dapointr/nn.hpp"

#include <span>
#include <string_view>

namespace dapointr::align {

using ad::Tape;
using ad::Var;

/// Which adversarial branch a discriminator serves.
enum class DiscriminatorId { enc_q, dec_q, enc_k, dec_k };

std::string_view discriminator_name(DiscriminatorId id);

inline constexpr double kProbabilityClamp = 1e-7;

/// d -> d/2 -> d/4 -> 1 with GELU between layers and a sigmoid output.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(nn::ParameterStore& store, DiscriminatorId id, Eigen::Index dim, Rng& rng,
                const std::string& prefix = "disc");

  /// One probability per input row (rows x 1).
  Var operator()(Tape& tape, Var features) const;

  DiscriminatorId id() const noexcept { return id_; }
  std::string parameter_prefix() const { return prefix_; }
  const nn::Mlp& map() const noexcept { return map_; }

 private:
  DiscriminatorId id_ = DiscriminatorId::enc_q;
  std::string prefix_;
  nn::Mlp map_;
};

/// -[l log p + (1 - l) log(1 - p)] averaged over `probs`, p clamped to
/// [1e-7, 1 - 1e-7].
double binary_cross_entropy(std::span<const double> probs, DomainLabel label);

/// BCE of the discriminator on one slot-0 vector per sample (each 1 x d),
/// after gradient reversal with strength eta; mean over the batch.
Var loss_domain_token(Tape& tape, const Discriminator& disc, std::span<const Var> tokens,
                      std::span<const DomainLabel> labels, double eta);

/// Token-wise BCE: per sample the mean over its N tokens (N x d), then the
/// mean over the batch. Tokens pass through gradient reversal first.
Var loss_token_wise(Tape& tape, const Discriminator& disc, std::span<const Var> tokens,
                    std::span<const DomainLabel> labels, double eta);

/// Linear warm-up of the reversal strength from 0 to eta_max over the first
/// `warmup_frac` of training, constant afterwards.
double reversal_strength(long long step, long long total_steps, double eta_max, double warmup_frac);

}  // namespace dapointr::align

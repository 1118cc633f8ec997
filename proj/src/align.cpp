#include "dapointr/align.hpp"

#include "dapointr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dapointr::align {

std::string_view discriminator_name(DiscriminatorId id) {
  switch (id) {
    case DiscriminatorId::enc_q: return "enc_q";
    case DiscriminatorId::dec_q: return "dec_q";
    case DiscriminatorId::enc_k: return "enc_k";
    case DiscriminatorId::dec_k: return "dec_k";
  }
  return "?";
}

Discriminator::Discriminator(nn::ParameterStore& store, DiscriminatorId id, Eigen::Index dim, Rng& rng,
                             const std::string& prefix)
    : id_(id), prefix_(prefix + "." + std::string(discriminator_name(id))) {
  const Eigen::Index h1 = std::max<Eigen::Index>(1, dim / 2);
  const Eigen::Index h2 = std::max<Eigen::Index>(1, dim / 4);
  map_ = nn::Mlp::create(store, prefix_, {dim, h1, h2, 1}, rng);
}

Var Discriminator::operator()(Tape& tape, Var features) const { return ad::sigmoid(map_(tape, features)); }

double binary_cross_entropy(std::span<const double> probs, DomainLabel label) {
  if (probs.empty()) throw InvalidInput("binary_cross_entropy: no probabilities");
  const double l = label_value(label);
  double total = 0.0;
  for (double p : probs) {
    const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= l * std::log(q) + (1.0 - l) * std::log(1.0 - q);
  }
  return total / static_cast<double>(probs.size());
}

namespace {

Var batch_loss(Tape& tape, const Discriminator& disc, std::span<const Var> tokens,
               std::span<const DomainLabel> labels, double eta, bool single_row) {
  if (tokens.empty() || tokens.size() != labels.size()) {
    throw InvalidInput("alignment loss: need one label per sample and a nonempty batch");
  }
  std::vector<Var> per_sample;
  per_sample.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (single_row && tokens[i].rows() != 1) throw InvalidInput("loss_domain_token: expected a 1 x d slot vector");
    Var probs = disc(tape, ad::gradient_reverse(tokens[i], eta));
    per_sample.push_back(ad::binary_cross_entropy(probs, label_value(labels[i]), kProbabilityClamp));
  }
  return ad::mean(ad::concat_rows(per_sample));
}

}  // namespace

Var loss_domain_token(Tape& tape, const Discriminator& disc, std::span<const Var> tokens,
                      std::span<const DomainLabel> labels, double eta) {
  return batch_loss(tape, disc, tokens, labels, eta, true);
}

Var loss_token_wise(Tape& tape, const Discriminator& disc, std::span<const Var> tokens,
                    std::span<const DomainLabel> labels, double eta) {
  return batch_loss(tape, disc, tokens, labels, eta, false);
}

double reversal_strength(long long step, long long total_steps, double eta_max, double warmup_frac) {
  if (eta_max < 0.0) throw ConfigError("grl_eta_max must be >= 0");
  if (warmup_frac <= 0.0 || total_steps <= 0) return eta_max;
  const double warm = warmup_frac * static_cast<double>(total_steps);
  return eta_max * std::min(1.0, static_cast<double>(step) / warm);
}

}  // namespace dapointr::align

#pragma once

#include "dapointr/config.hpp"
#include "dapointr/dataset.hpp"
#include "dapointr/model.hpp"
#include "dapointr/nn.hpp"
#include "dapointr/vpc.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dapointr::train {

struct LossReport {
  double completion = 0.0;
  double enc_q = 0.0;
  double dec_q = 0.0;
  double enc_k = 0.0;
  double dec_k = 0.0;
  double cons = 0.0;
  double pseudo = 0.0;
  double total = 0.0;
  double eta = 0.0;

  static const std::vector<std::string>& columns();
  std::vector<double> values() const;
};

/// alpha (enc_q + dec_q) + beta (enc_k + dec_k) + gamma cons.
double adaptation_contribution(const LossReport& r, const LossWeights& w);
/// completion + adaptation_contribution + pseudo_weight * pseudo.
double total_loss(const LossReport& r, const LossWeights& w, double pseudo_weight);

struct TrainState {
  long long step = 0;
  long long total_steps = 0;
  int epoch = 0;
  std::optional<double> threshold;
  vpc::ScoreWindow scores;
  vpc::PseudoLabelStore pseudo_labels;
  Rng rng;
  std::optional<double> best_eval_cd;
};

/// Owns model, optimizer and loop state for one run.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  /// Forwards both batches, applies one optimizer update and returns the
  /// loss terms. Throws NonFiniteLoss (without updating) if any term is NaN/Inf.
  LossReport train_step(std::span<const Sample> source, std::span<const Sample> target);

  /// Losses at the current parameters without updating anything.
  LossReport evaluate_losses(std::span<const Sample> source, std::span<const Sample> target);

  /// Closes the consistency-score window and refreshes the pseudo-label threshold.
  void end_epoch();

  void save_checkpoint(const std::filesystem::path& path) const;
  static std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path);

  Model& model() noexcept { return *model_; }
  const Model& model() const noexcept { return *model_; }
  nn::AdamW& optimizer() noexcept { return *optimizer_; }
  TrainState& state() noexcept { return state_; }
  const TrainState& state() const noexcept { return state_; }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  LossReport run(std::span<const Sample> source, std::span<const Sample> target, bool update);

  TrainConfig cfg_;
  std::unique_ptr<Model> model_;
  std::unique_ptr<nn::AdamW> optimizer_;
  TrainState state_;
};

struct TrainResult {
  double final_eval_cd = 0.0;  // scaled x1e4, target eval split, last epoch
  double best_eval_cd = 0.0;
  long long steps = 0;
};

/// Epoch loop over <data>/source/train and <data>/target/train, evaluating
/// on <data>/target/eval. Writes metrics.tsv (one LossReport per step),
/// eval.tsv, last.ckpt and best.ckpt into `out`.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& resume = std::nullopt, std::ostream* progress = nullptr);

}  // namespace dapointr::train

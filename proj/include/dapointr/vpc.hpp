#pragma once

#include "dapointr/geometry.hpp"
#include "dapointr/head.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dapointr::vpc {

using ad::Tape;
using ad::Var;

/// Point-wise mean over layers; every layer must have the same cardinality.
Var vote_mean(std::span<const Var> per_layer);
Points vote_mean(std::span<const Points> per_layer);

/// Mean over layers l of CD(M_mean, Pred_l), raw units.
Var consistency_loss(Tape& tape, const head::PredictionSet& pred);
double consistency_score(std::span<const Points> per_layer);

/// p-th percentile (linear interpolation between order statistics) of the
/// score window; lower scores are better.
double update_threshold(std::span<const double> scores, double percentile);

struct PseudoLabel {
  PointCloud cloud;
  double score = 0.0;
  int epoch = 0;
};

/// One pseudo complete cloud per target sample id; re-harvesting overwrites.
class PseudoLabelStore {
 public:
  void put(const std::string& id, PseudoLabel label);
  const PseudoLabel* find(const std::string& id) const;
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  const std::map<std::string, PseudoLabel>& entries() const noexcept { return labels_; }
  void clear() { labels_.clear(); }

 private:
  std::map<std::string, PseudoLabel> labels_;
};

/// A detached target prediction with its consistency score.
struct TargetPrediction {
  std::string id;
  double score = 0.0;
  PointCloud final_cloud;
};

/// Stores every prediction with score <= tau; returns how many were stored.
std::size_t harvest_pseudo_labels(std::span<const TargetPrediction> predictions, double tau, int epoch,
                                  PseudoLabelStore& store);

/// CD(pred.final, stored label) for `id`; a constant zero when absent.
Var pseudo_label_loss(Tape& tape, const head::PredictionSet& pred, const std::string& id,
                      const PseudoLabelStore& store);

/// Scores of the epoch in progress and of the last complete epoch.
class ScoreWindow {
 public:
  void push(double score) { current_.push_back(score); }
  /// Promotes the current epoch to the window; returns false if it was empty.
  bool close_epoch();
  std::span<const double> window() const noexcept { return window_; }
  std::span<const double> current() const noexcept { return current_; }
  void restore(std::vector<double> window, std::vector<double> current) {
    window_ = std::move(window);
    current_ = std::move(current);
  }

 private:
  std::vector<double> window_;
  std::vector<double> current_;
};

}  // namespace dapointr::vpc

#include "dapointr/vpc.hpp"

#include "dapointr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dapointr::vpc {

using ad::Matrix;

namespace {

// Running mean: identical layers reproduce their common value exactly.
template <typename M>
M running_mean(std::span<const M> layers) {
  M m = layers.front();
  for (std::size_t l = 1; l < layers.size(); ++l) {
    m += (layers[l] - m) / static_cast<double>(l + 1);
  }
  return m;
}

}  // namespace

Var vote_mean(std::span<const Var> per_layer) {
  if (per_layer.empty()) throw InvalidInput("vote_mean: no layers");
  std::vector<ad::Matrix> values;
  for (const Var& v : per_layer) {
    if (v.rows() != per_layer.front().rows() || v.cols() != per_layer.front().cols()) {
      throw InvalidInput("vote_mean: layers differ in cardinality");
    }
    values.push_back(v.value());
  }
  const double w = 1.0 / static_cast<double>(per_layer.size());
  const std::vector<Var> parents(per_layer.begin(), per_layer.end());
  return per_layer.front().tape().record(
      running_mean<ad::Matrix>(values), parents, [parents, w](Tape& t, const ad::Matrix& g) {
        for (const Var& p : parents) t.accumulate_expr(p, w * g);
      });
}

Points vote_mean(std::span<const Points> per_layer) {
  if (per_layer.empty()) throw InvalidInput("vote_mean: no layers");
  for (const auto& p : per_layer) {
    if (p.rows() != per_layer.front().rows()) throw InvalidInput("vote_mean: layers differ in cardinality");
  }
  return running_mean<Points>(per_layer);
}

Var consistency_loss(Tape& /*tape*/, const head::PredictionSet& pred) {
  if (pred.per_layer.empty()) throw InvalidInput("consistency_loss: no per-layer predictions");
  Var mean_cloud = pred.voted_mean.valid() ? pred.voted_mean : vote_mean(pred.per_layer);
  std::vector<Var> terms;
  for (const Var& layer : pred.per_layer) terms.push_back(ad::chamfer(mean_cloud, layer));
  return ad::mean(ad::concat_rows(terms));
}

double consistency_score(std::span<const Points> per_layer) {
  const PointCloud m(vote_mean(per_layer));
  double total = 0.0;
  for (const auto& p : per_layer) total += geometry::chamfer_distance(m, PointCloud(p)).raw;
  return total / static_cast<double>(per_layer.size());
}

double update_threshold(std::span<const double> scores, double percentile) {
  if (scores.empty()) throw ConfigError("update_threshold: empty score window");
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const double pos = percentile / 100.0 * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + (s[hi] - s[lo]) * frac;
}

void PseudoLabelStore::put(const std::string& id, PseudoLabel label) { labels_[id] = std::move(label); }

const PseudoLabel* PseudoLabelStore::find(const std::string& id) const {
  auto it = labels_.find(id);
  return it == labels_.end() ? nullptr : &it->second;
}

std::size_t harvest_pseudo_labels(std::span<const TargetPrediction> predictions, double tau, int epoch,
                                  PseudoLabelStore& store) {
  std::size_t harvested = 0;
  for (const auto& p : predictions) {
    if (p.score <= tau) {
      store.put(p.id, PseudoLabel{p.final_cloud, p.score, epoch});
      ++harvested;
    }
  }
  return harvested;
}

Var pseudo_label_loss(Tape& tape, const head::PredictionSet& pred, const std::string& id,
                      const PseudoLabelStore& store) {
  const PseudoLabel* label = store.find(id);
  if (label == nullptr) return tape.constant(Matrix::Zero(1, 1));
  return ad::chamfer(pred.final_cloud, tape.constant(Matrix(label->cloud.points())));
}

bool ScoreWindow::close_epoch() {
  if (current_.empty()) return false;
  window_ = std::move(current_);
  current_.clear();
  return true;
}

}  // namespace dapointr::vpc

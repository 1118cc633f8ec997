#pragma once

#include "dapointr/dataset.hpp"
#include "dapointr/domain.hpp"
#include "dapointr/model.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dapointr::eval {

enum class Metric { cd, ucd, uhd };

std::string_view metric_name(Metric m);
/// Comma-separated list, e.g. "cd,ucd,uhd".
std::vector<Metric> parse_metrics(std::string_view list);

/// Scaled metric values (CD, UCD x1e4; UHD x1e2).
struct MetricRow {
  std::string label;  // category, sample id, or "Avg"
  std::size_t count = 0;
  std::map<Metric, double> values;
};

struct MetricTable {
  std::vector<Metric> metrics;
  std::vector<MetricRow> samples;     // one per evaluated cloud
  std::vector<MetricRow> categories;  // per-category means, sorted by name
  MetricRow average;                  // unweighted mean of the category rows

  std::string to_csv() const;
  std::string to_text() const;
};

using Completer = std::function<PointCloud(const PointCloud&)>;

/// CD(pred, gt); UCD and UHD from the partial input to the prediction.
MetricTable evaluate(const Completer& complete, std::span<const Sample> samples, std::span<const Metric> metrics);

struct ProbeReport {
  double accuracy = 0.0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  Eigen::MatrixX2d projection;  // first two principal components, one row per sample
  std::vector<DomainLabel> labels;

  /// Columns x, y, lambda.
  std::string to_csv() const;
};

/// Fits an L2-regularized logistic-regression domain classifier on a seeded
/// half of the rows and reports accuracy on the other half, plus a 2D PCA
/// projection of every row.
ProbeReport probe_features(const Eigen::MatrixXd& features, std::span<const DomainLabel> labels,
                           std::uint64_t seed);

/// Pooled encoder features of every partial in both splits, then probe_features.
ProbeReport probe_alignment(const Model& model, std::span<const Sample> source, std::span<const Sample> target,
                            std::uint64_t seed);

}  // namespace dapointr::eval

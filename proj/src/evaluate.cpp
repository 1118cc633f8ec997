#include "dapointr/evaluate.hpp"

#include "dapointr/errors.hpp"
#include "dapointr/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace dapointr {
namespace eval {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::cd: return "cd";
    case Metric::ucd: return "ucd";
    case Metric::uhd: return "uhd";
  }
  return "?";
}

std::vector<Metric> parse_metrics(std::string_view list) {
  std::vector<Metric> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto end = list.find(',', pos);
    if (end == std::string_view::npos) end = list.size();
    const auto tok = list.substr(pos, end - pos);
    bool found = false;
    for (auto m : {Metric::cd, Metric::ucd, Metric::uhd}) {
      if (metric_name(m) == tok) {
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown metric '" + std::string(tok) + "' (expected cd, ucd, uhd)");
    pos = end + 1;
  }
  return out;
}

MetricTable evaluate(const Completer& complete, std::span<const Sample> samples, std::span<const Metric> metrics) {
  if (metrics.empty()) throw ConfigError("evaluate: no metrics requested");
  const bool needs_truth = std::find(metrics.begin(), metrics.end(), Metric::cd) != metrics.end();
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    if (needs_truth && !s.complete) missing.push_back(s.id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
    throw InvalidInput("evaluate: missing ground truth for: " + ids);
  }
  if (samples.empty()) throw InvalidInput("evaluate: no samples");

  MetricTable t;
  t.metrics.assign(metrics.begin(), metrics.end());
  std::map<std::string, MetricRow> by_cat;
  for (const auto& s : samples) {
    const PointCloud pred = complete(s.partial);
    MetricRow row{s.id, 1, {}};
    for (auto m : metrics) {
      switch (m) {
        case Metric::cd: row.values[m] = geometry::chamfer_distance(pred, *s.complete).scaled; break;
        case Metric::ucd: row.values[m] = geometry::unidirectional_chamfer(s.partial, pred).scaled; break;
        case Metric::uhd: row.values[m] = geometry::unidirectional_hausdorff(s.partial, pred).scaled; break;
      }
    }
    auto& cat = by_cat[s.category];
    cat.label = s.category;
    cat.count += 1;
    for (auto& [m, v] : row.values) cat.values[m] += v;
    t.samples.push_back(std::move(row));
  }
  t.average.label = "Avg";
  for (auto& [name, row] : by_cat) {
    for (auto& [m, v] : row.values) {
      v /= static_cast<double>(row.count);
      t.average.values[m] += v;
    }
    t.average.count += row.count;
    t.categories.push_back(row);
  }
  for (auto& [m, v] : t.average.values) v /= static_cast<double>(t.categories.size());
  return t;
}

std::string MetricTable::to_csv() const {
  std::ostringstream o;
  o << std::setprecision(17) << "category,count";
  for (auto m : metrics) o << ',' << metric_name(m);
  o << '\n';
  auto line = [&](const MetricRow& r) {
    o << r.label << ',' << r.count;
    for (auto m : metrics) o << ',' << r.values.at(m);
    o << '\n';
  };
  for (const auto& r : categories) line(r);
  line(average);
  return o.str();
}

std::string MetricTable::to_text() const {
  std::ostringstream o;
  o << std::left << std::setw(12) << "category" << std::right << std::setw(7) << "count";
  for (auto m : metrics) {
    const std::string head = std::string(metric_name(m)) + (m == Metric::uhd ? " x1e2" : " x1e4");
    o << std::setw(14) << head;
  }
  o << '\n' << std::fixed << std::setprecision(3);
  auto line = [&](const MetricRow& r) {
    o << std::left << std::setw(12) << r.label << std::right << std::setw(7) << r.count;
    for (auto m : metrics) o << std::setw(14) << r.values.at(m);
    o << '\n';
  };
  for (const auto& r : categories) line(r);
  line(average);
  return o.str();
}

std::string ProbeReport::to_csv() const {
  std::ostringstream o;
  o << std::setprecision(17) << "x,y,lambda\n";
  for (Eigen::Index i = 0; i < projection.rows(); ++i) {
    o << projection(i, 0) << ',' << projection(i, 1) << ',' << static_cast<int>(labels[static_cast<std::size_t>(i)])
      << '\n';
  }
  return o.str();
}

namespace {

constexpr double kRidge = 1e-2;
constexpr int kNewtonIterations = 50;

Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  // Newton / IRLS on the ridge-penalized log-likelihood; bias is column 0 and unpenalized.
  const Eigen::Index d = x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd penalty = kRidge * static_cast<double>(x.rows()) * Eigen::MatrixXd::Identity(d, d);
  penalty(0, 0) = 0.0;
  for (int it = 0; it < kNewtonIterations; ++it) {
    const Eigen::VectorXd z = x * w;
    const Eigen::VectorXd p = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    const Eigen::VectorXd s = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::VectorXd grad = x.transpose() * (p - y) + penalty * w;
    const Eigen::MatrixXd hess = x.transpose() * s.asDiagonal() * x + penalty +
                                 1e-9 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd delta = hess.ldlt().solve(grad);
    w -= delta;
    if (delta.norm() < 1e-10) break;
  }
  return w;
}

}  // namespace

ProbeReport probe_features(const Eigen::MatrixXd& features, std::span<const DomainLabel> labels, std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (n < 4 || static_cast<std::size_t>(n) != labels.size()) {
    throw InvalidInput("probe: need >= 4 samples with one label each");
  }
  ProbeReport r;
  r.labels.assign(labels.begin(), labels.end());

  // stratified half split so both domains appear in train and test
  Rng rng(derive_seed(seed, "probe-split"));
  std::vector<std::size_t> train_idx, test_idx;
  for (auto l : {DomainLabel::source, DomainLabel::target}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == l) idx.push_back(i);
    }
    if (idx.size() < 2) throw InvalidInput("probe: each domain needs at least two samples");
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t half = idx.size() / 2;
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
    test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
  }
  r.train_count = train_idx.size();
  r.test_count = test_idx.size();

  const Eigen::Index d = features.cols();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(d);
  for (auto i : train_idx) mu += features.row(static_cast<Eigen::Index>(i));
  mu /= static_cast<double>(train_idx.size());
  Eigen::RowVectorXd sd = Eigen::RowVectorXd::Zero(d);
  for (auto i : train_idx) sd += (features.row(static_cast<Eigen::Index>(i)) - mu).cwiseAbs2();
  sd = (sd / static_cast<double>(train_idx.size())).cwiseSqrt();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (sd[c] < 1e-12) sd[c] = 1.0;
  }
  auto design = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), d + 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      x(static_cast<Eigen::Index>(k), 0) = 1.0;
      x.row(static_cast<Eigen::Index>(k)).tail(d) =
          (features.row(static_cast<Eigen::Index>(idx[k])) - mu).cwiseQuotient(sd);
    }
    return x;
  };
  Eigen::VectorXd y(static_cast<Eigen::Index>(train_idx.size()));
  for (std::size_t k = 0; k < train_idx.size(); ++k) y[static_cast<Eigen::Index>(k)] = label_value(labels[train_idx[k]]);
  const Eigen::VectorXd w = fit_logistic(design(train_idx), y);
  const Eigen::VectorXd z = design(test_idx) * w;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < test_idx.size(); ++k) {
    const bool predict_target = z[static_cast<Eigen::Index>(k)] > 0.0;
    if (predict_target == (labels[test_idx[k]] == DomainLabel::target)) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());

  // PCA over all rows; each component's largest-magnitude entry made positive
  const Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 2);
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, d); ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    basis.col(c) = v;
  }
  r.projection = centered * basis;
  return r;
}

ProbeReport probe_alignment(const Model& model, std::span<const Sample> source, std::span<const Sample> target,
                            std::uint64_t seed) {
  if (source.empty() || target.empty()) throw InvalidInput("probe_alignment: both splits must be nonempty");
  const auto d = static_cast<Eigen::Index>(model.config().embed_dim);
  Eigen::MatrixXd feats(static_cast<Eigen::Index>(source.size() + target.size()), d);
  std::vector<DomainLabel> labels;
  Eigen::Index r = 0;
  for (const auto& s : source) {
    feats.row(r++) = model.encoder_feature(s.partial);
    labels.push_back(DomainLabel::source);
  }
  for (const auto& s : target) {
    feats.row(r++) = model.encoder_feature(s.partial);
    labels.push_back(DomainLabel::target);
  }
  return probe_features(feats, labels, seed);
}

}  // namespace eval
}  // namespace dapointr

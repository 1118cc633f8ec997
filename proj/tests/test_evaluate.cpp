#include "suites.hpp"

#include "dapointr/cloud_io.hpp"
#include "dapointr/errors.hpp"
#include "dapointr/evaluate.hpp"
#include "dapointr/geometry.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace dapointr;
using namespace dapointr::eval;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> eval_samples() {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < 6; ++i) s.push_back(suites::make_sample(100 + i, i, true, 128, 256));
  return s;
}

const std::vector<Metric> kAll{Metric::cd, Metric::ucd, Metric::uhd};

}  // namespace

TEST(Metrics, ParseList) {
  EXPECT_EQ(parse_metrics("cd,ucd,uhd"), kAll);
  EXPECT_EQ(parse_metrics("uhd"), std::vector<Metric>{Metric::uhd});
  EXPECT_THROW(parse_metrics("cd,emd"), ConfigError);
  EXPECT_EQ(metric_name(Metric::ucd), "ucd");
}

TEST(Evaluate, OracleCompleterHasZeroCd) {
  const auto samples = eval_samples();
  std::size_t call = 0;
  const Completer oracle = [&](const PointCloud&) { return *samples[call++].complete; };
  const auto t = evaluate(oracle, samples, kAll);
  for (const auto& row : t.samples) EXPECT_NEAR(row.values.at(Metric::cd), 0.0, 1e-12) << row.label;
}

TEST(Evaluate, IdentityCompleterHasZeroUcd) {
  const auto samples = eval_samples();
  const Completer identity = [](const PointCloud& p) { return p; };
  const auto t = evaluate(identity, samples, kAll);
  for (const auto& row : t.samples) {
    EXPECT_NEAR(row.values.at(Metric::ucd), 0.0, 1e-12);
    EXPECT_NEAR(row.values.at(Metric::uhd), 0.0, 1e-12);
    EXPECT_GT(row.values.at(Metric::cd), 0.0);
  }
}

TEST(Evaluate, MatchesDirectGeometryAndAveragesCategories) {
  const auto samples = eval_samples();
  const Completer shrink = [](const PointCloud& p) { return PointCloud(Points(0.9 * p.points())); };
  const auto t = evaluate(shrink, samples, kAll);
  ASSERT_EQ(t.samples.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PointCloud pred(Points(0.9 * samples[i].partial.points()));
    const auto& v = t.samples[i].values;
    EXPECT_NEAR(v.at(Metric::cd), geometry::chamfer_distance(pred, *samples[i].complete).scaled, 1e-9);
    EXPECT_NEAR(v.at(Metric::ucd), geometry::unidirectional_chamfer(samples[i].partial, pred).scaled, 1e-9);
    EXPECT_NEAR(v.at(Metric::uhd), geometry::unidirectional_hausdorff(samples[i].partial, pred).scaled, 1e-9);
  }
  ASSERT_FALSE(t.categories.empty());
  for (auto m : kAll) {
    double mean = 0.0;
    for (const auto& c : t.categories) mean += c.values.at(m);
    mean /= static_cast<double>(t.categories.size());
    EXPECT_NEAR(t.average.values.at(m), mean, 1e-9);
  }
  std::size_t counted = 0;
  for (const auto& c : t.categories) counted += c.count;
  EXPECT_EQ(counted, samples.size());

  std::istringstream csv(t.to_csv());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "category,count,cd,ucd,uhd");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(csv, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, t.categories.size() + 1);
  EXPECT_EQ(last.rfind("Avg,", 0), 0u);
  EXPECT_NE(t.to_text().find("Avg"), std::string::npos);
}

TEST(Evaluate, MissingGroundTruthNamesIds) {
  auto samples = eval_samples();
  samples[1].complete.reset();
  samples[4].complete.reset();
  const Completer identity = [](const PointCloud& p) { return p; };
  try {
    evaluate(identity, samples, kAll);
    FAIL();
  } catch (const InvalidInput& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(samples[1].id), std::string::npos) << what;
    EXPECT_NE(what.find(samples[4].id), std::string::npos) << what;
  }
  // UCD and UHD do not need ground truth
  EXPECT_NO_THROW(evaluate(identity, samples, std::vector<Metric>{Metric::ucd, Metric::uhd}));
}

namespace {

Eigen::MatrixXd gaussian_features(std::size_t n, double shift, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd f(n, 8);
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = g(rng) + (j == 0 ? shift : 0.0);
  return f;
}

std::pair<Eigen::MatrixXd, std::vector<DomainLabel>> two_domains(double shift, std::uint64_t seed) {
  const auto a = gaussian_features(100, 0.0, seed);
  const auto b = gaussian_features(100, shift, seed + 1);
  Eigen::MatrixXd f(200, 8);
  f << a, b;
  std::vector<DomainLabel> labels(100, DomainLabel::source);
  labels.resize(200, DomainLabel::target);
  return {f, labels};
}

}  // namespace

TEST(Probe, IndistinguishableDomainsNearChance) {
  const auto [f, labels] = two_domains(0.0, 1);
  const auto r = probe_features(f, labels, 0);
  EXPECT_NEAR(r.accuracy, 0.5, 0.1);
  EXPECT_EQ(r.train_count + r.test_count, 200u);
}

TEST(Probe, SeparatedDomainsClassified) {
  const auto [f, labels] = two_domains(10.0, 2);
  const auto r = probe_features(f, labels, 0);
  EXPECT_GE(r.accuracy, 0.99);
}

TEST(Probe, ProjectionShapeAndCsv) {
  const auto [f, labels] = two_domains(3.0, 3);
  const auto r = probe_features(f, labels, 5);
  EXPECT_EQ(r.projection.rows(), 200);
  EXPECT_EQ(r.labels.size(), 200u);
  std::istringstream csv(r.to_csv());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "x,y,lambda");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 200u);
  const auto again = probe_features(f, labels, 5);
  EXPECT_EQ(again.accuracy, r.accuracy);
  EXPECT_TRUE(again.projection.isApprox(r.projection, 0.0) || again.projection == r.projection);
}

TEST(Probe, RejectsSingleDomain) {
  const auto f = gaussian_features(20, 0.0, 4);
  const std::vector<DomainLabel> labels(20, DomainLabel::source);
  EXPECT_THROW(probe_features(f, labels, 0), InvalidInput);
}

TEST(Complete, OutputSizeAndDeterminism) {
  const Model model(suites::tiny_config().model, 11);
  const auto s = suites::make_sample(7, 2, false, 300);
  const auto a = model.complete(s.partial);
  const auto b = model.complete(s.partial);
  EXPECT_EQ(a.size(), model.config().n_proxies * model.config().up_factor);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.points().allFinite());
  const fs::path out = fs::temp_directory_path() / "dapointr_complete.ply";
  io::write_cloud(a, out);
  const auto back = io::read_cloud(out);
  EXPECT_EQ(back.size(), a.size());
  EXPECT_TRUE(back.points().isApprox(a.points(), 1e-6));
}

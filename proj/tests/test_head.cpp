#include "suites.hpp"

#include "dapointr/head.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace dapointr;
using namespace dapointr::head;
using ad::Matrix;
using ad::Tape;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void zero(const nn::Linear& l) {
  l.weight->value().setZero();
  l.bias->value().setZero();
}

}  // namespace

TEST(LayerPredictor, ZeroOffsetsReproduceCoarse) {
  nn::ParameterStore store;
  Rng rng(1);
  LayerPredictor lp(store, "layer", 8, 6, rng);
  zero(lp.map().last());
  Tape t(false);
  seq2seq::DecoderOutput dec;
  dec.dynamic_out = {t.constant(random_matrix(rng, 5, 8)), t.constant(random_matrix(rng, 5, 8))};
  const Matrix coarse = random_matrix(rng, 5, 3);
  const auto per_layer = lp.predict_per_layer(t, dec, t.constant(coarse));
  ASSERT_EQ(per_layer.size(), 2u);
  for (const auto& p : per_layer) EXPECT_EQ(p.value(), coarse);
}

TEST(LayerPredictor, OffsetsExample) {
  Tape t(false);
  const auto coarse = t.constant(Matrix::Zero(1, 3));
  const ad::Var offsets[] = {t.constant(Matrix{{-1.0, 0.0, 0.0}}), t.constant(Matrix{{1.0, 0.0, 0.0}})};
  const auto p = predictions_from_offsets(coarse, offsets);
  EXPECT_EQ(p[0].value(), (Matrix{{-1.0, 0.0, 0.0}}));
  EXPECT_EQ(p[1].value(), (Matrix{{1.0, 0.0, 0.0}}));
}

TEST(LayerPredictor, SlotPermutationCarriesThroughEveryLayer) {
  nn::ParameterStore store;
  Rng rng(2);
  LayerPredictor lp(store, "layer", 8, 6, rng);
  Tape t(false);
  const Matrix d0 = random_matrix(rng, 6, 8), d1 = random_matrix(rng, 6, 8), d2 = random_matrix(rng, 6, 8);
  const Matrix coarse = random_matrix(rng, 6, 3);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  seq2seq::DecoderOutput a, b;
  a.dynamic_out = {t.constant(d0), t.constant(d1), t.constant(d2)};
  for (const auto& v : a.dynamic_out) b.dynamic_out.push_back(ad::gather_rows(v, perm));
  const auto pa = lp.predict_per_layer(t, a, t.constant(coarse));
  const auto pb = lp.predict_per_layer(t, b, ad::gather_rows(t.constant(coarse), perm));
  ASSERT_EQ(pa.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t j = 0; j < perm.size(); ++j) {
      const Matrix rb = pb[l].value().row(static_cast<Eigen::Index>(j));
      const Matrix ra = pa[l].value().row(static_cast<Eigen::Index>(perm[j]));
      EXPECT_LT((rb - ra).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

class RefinerTest : public ::testing::TestWithParam<RefinerKind> {};

TEST_P(RefinerTest, OutputCountIsNTimesUpFactor) {
  nn::ParameterStore store;
  Rng rng(3);
  const auto r = make_refiner(store, "refine", 16, {GetParam(), 8, 16}, rng);
  Tape t(false);
  const auto out = r->refine(t, t.constant(random_matrix(rng, 64, 16)), t.constant(random_matrix(rng, 64, 3)));
  EXPECT_EQ(out.rows(), 512);
  EXPECT_EQ(out.cols(), 3);
  EXPECT_EQ(r->kind(), GetParam());
}

TEST_P(RefinerTest, ZeroDisplacementCollapsesOntoParents) {
  nn::ParameterStore store;
  Rng rng(4);
  for (std::size_t up : {1u, 4u}) {
    const auto r = make_refiner(store, "refine" + std::to_string(up), 8, {GetParam(), up, 8}, rng);
    zero(r->output_layer());
    Tape t(false);
    const Matrix coarse = random_matrix(rng, 5, 3);
    const auto out = r->refine(t, t.constant(random_matrix(rng, 5, 8)), t.constant(coarse));
    ASSERT_EQ(out.rows(), static_cast<Eigen::Index>(5 * up));
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      EXPECT_EQ(Matrix(out.value().row(i)), Matrix(coarse.row(i / static_cast<Eigen::Index>(up))));
    }
  }
}

TEST_P(RefinerTest, ChildrenOfAParentAreDistinct) {
  nn::ParameterStore store;
  Rng rng(5);
  const auto r = make_refiner(store, "refine", 8, {GetParam(), 4, 8}, rng);
  Tape t(false);
  const auto out = r->refine(t, t.constant(random_matrix(rng, 3, 8)), t.constant(random_matrix(rng, 3, 3)));
  for (Eigen::Index p = 0; p < 3; ++p) {
    for (Eigen::Index a = 0; a < 4; ++a) {
      for (Eigen::Index b = a + 1; b < 4; ++b) {
        EXPECT_GT((out.value().row(p * 4 + a) - out.value().row(p * 4 + b)).norm(), 1e-9);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(BothHeads, RefinerTest, ::testing::Values(RefinerKind::fold, RefinerKind::spd),
                         [](const auto& info) { return std::string(refiner_name(info.param)); });

TEST(Refiners, InterchangeableShapes) {
  nn::ParameterStore store;
  Rng rng(6);
  const auto fold = make_refiner(store, "fold", 8, {RefinerKind::fold, 4, 8}, rng);
  const auto spd = make_refiner(store, "spd", 8, {RefinerKind::spd, 4, 8}, rng);
  Tape t(false);
  const auto tokens = t.constant(random_matrix(rng, 7, 8));
  const auto coarse = t.constant(random_matrix(rng, 7, 3));
  const auto a = fold->refine(t, tokens, coarse);
  const auto b = spd->refine(t, tokens, coarse);
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  EXPECT_NE(a.value(), b.value());
}

TEST(CompletionLoss, ZeroAtGroundTruthAndMatchesOracle) {
  Rng rng(7);
  const auto gt_cloud = suites::random_cloud(rng, 30, false);
  const PointCloud gt = suites::from_oracle(gt_cloud);
  const auto seeds = geometry::farthest_point_sample(gt, 6, geometry::lexicographic_min_index(gt));
  Tape t(false);
  PredictionSet p;
  p.coarse = t.constant(gt.subset(seeds).points());
  p.final_cloud = t.constant(gt.points());
  EXPECT_EQ(completion_loss(t, p, gt).scalar(), 0.0);

  // single-point toy
  PredictionSet q;
  q.coarse = t.constant(Matrix{{1.0, 0.0, 0.0}});
  q.final_cloud = t.constant(Matrix{{0.0, 2.0, 0.0}, {0.0, 0.0, 1.0}});
  const PointCloud one{{0.0, 0.0, 0.0}};
  const double expect = oracle::chamfer({{1, 0, 0}}, {{0, 0, 0}}) +
                        oracle::chamfer({{0, 2, 0}, {0, 0, 1}}, {{0, 0, 0}});
  EXPECT_DOUBLE_EQ(completion_loss(t, q, one).scalar(), expect);
}

TEST(CompletionLoss, Nonnegative) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    Tape t(false);
    PredictionSet p;
    p.coarse = t.constant(random_matrix(rng, 4, 3));
    p.final_cloud = t.constant(random_matrix(rng, 16, 3));
    EXPECT_GE(completion_loss(t, p, suites::from_oracle(suites::random_cloud(rng, 20, false))).scalar(), 0.0);
  }
}

TEST(Head, GradientChecks) {
  for (const auto& [name, r] : suites::gradient_checks()) {
    if (name.rfind("refiner", 0) == 0 || name == "layer predictor" || name == "completion loss") {
      EXPECT_TRUE(r.ok()) << name << ": " << r.worst;
    }
  }
}

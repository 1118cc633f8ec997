#include "suites.hpp"

#include "dapointr/align.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace dapointr;
using namespace dapointr::align;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

namespace {

constexpr double kLn2 = std::numbers::ln2;

// Output layer zeroed: every probability is exactly 0.5.
Discriminator neutral(nn::ParameterStore& store, DiscriminatorId id, Eigen::Index d, Rng& rng) {
  Discriminator disc(store, id, d, rng);
  disc.map().last().weight->value().setZero();
  disc.map().last().bias->value().setZero();
  return disc;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double center = 0.0) {
  std::normal_distribution<double> g(center, 0.3);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST(Bce, Examples) {
  const double half[] = {0.5, 0.5};
  EXPECT_NEAR(binary_cross_entropy(half, DomainLabel::source), kLn2, 1e-15);
  const double near_one[] = {1.0 - 1e-9};
  EXPECT_LT(binary_cross_entropy(near_one, DomainLabel::target), 1e-6);
  const double mixed[] = {0.5, 0.25};
  EXPECT_NEAR(binary_cross_entropy(mixed, DomainLabel::target), (kLn2 + std::log(4.0)) / 2.0, 1e-12);
  EXPECT_NEAR((kLn2 + std::log(4.0)) / 2.0, 1.0397, 1e-4);
}

TEST(Bce, BoundaryClampKeepsLogsFinite) {
  const double extremes[] = {0.0, 1.0};
  const double v = binary_cross_entropy(extremes, DomainLabel::source);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -std::log(kProbabilityClamp) / 2.0, 1e-6);
}

TEST(DomainTokenLoss, HalfProbabilityGivesLn2) {
  nn::ParameterStore store;
  Rng rng(1);
  const auto disc = neutral(store, DiscriminatorId::enc_q, 8, rng);
  Tape t;
  const Var tokens[] = {t.constant(random_matrix(rng, 1, 8)), t.constant(random_matrix(rng, 1, 8))};
  const DomainLabel labels[] = {DomainLabel::source, DomainLabel::target};
  EXPECT_NEAR(loss_domain_token(t, disc, tokens, labels, 1.0).scalar(), kLn2, 1e-12);
}

TEST(TokenWiseLoss, HalfProbabilityAndDegenerateCase) {
  nn::ParameterStore store;
  Rng rng(2);
  const auto disc = neutral(store, DiscriminatorId::dec_k, 8, rng);
  const Discriminator live(store, DiscriminatorId::enc_k, 8, rng, "live");
  Tape t;
  const Var tokens[] = {t.constant(random_matrix(rng, 5, 8)), t.constant(random_matrix(rng, 3, 8))};
  const DomainLabel labels[] = {DomainLabel::target, DomainLabel::source};
  EXPECT_NEAR(loss_token_wise(t, disc, tokens, labels, 1.0).scalar(), kLn2, 1e-12);

  // N = 1 reduces to the domain-token loss
  const Var single[] = {t.constant(random_matrix(rng, 1, 8))};
  const DomainLabel one[] = {DomainLabel::target};
  EXPECT_DOUBLE_EQ(loss_token_wise(t, live, single, one, 1.0).scalar(),
                   loss_domain_token(t, live, single, one, 1.0).scalar());
}

TEST(TokenWiseLoss, PerSampleMeanThenBatchMean) {
  nn::ParameterStore store;
  Rng rng(3);
  const Discriminator disc(store, DiscriminatorId::enc_k, 8, rng);
  Tape t;
  const Matrix a = random_matrix(rng, 4, 8), b = random_matrix(rng, 2, 8);
  const Var tokens[] = {t.constant(a), t.constant(b)};
  const DomainLabel labels[] = {DomainLabel::source, DomainLabel::target};
  const Matrix pa = disc(t, t.constant(a)).value(), pb = disc(t, t.constant(b)).value();
  const double expect = (binary_cross_entropy({pa.data(), 4}, DomainLabel::source) +
                         binary_cross_entropy({pb.data(), 2}, DomainLabel::target)) / 2.0;
  EXPECT_NEAR(loss_token_wise(t, disc, tokens, labels, 1.0).scalar(), expect, 1e-12);
}

TEST(Alignment, ZeroEtaBlocksFeatureGradients) {
  nn::ParameterStore store;
  Rng rng(4);
  const Discriminator dq(store, DiscriminatorId::enc_q, 8, rng);
  const Discriminator dk(store, DiscriminatorId::enc_k, 8, rng);
  Parameter f0("f0", random_matrix(rng, 3, 8)), f1("f1", random_matrix(rng, 3, 8));
  Tape t;
  const Var feats[] = {t.parameter(f0), t.parameter(f1)};
  const Var slots[] = {ad::slice_rows(feats[0], 0, 1), ad::slice_rows(feats[1], 0, 1)};
  const DomainLabel labels[] = {DomainLabel::source, DomainLabel::target};
  t.backward(ad::add(loss_token_wise(t, dk, feats, labels, 0.0), loss_domain_token(t, dq, slots, labels, 0.0)));
  EXPECT_TRUE(f0.grad().isZero(0.0));
  EXPECT_TRUE(f1.grad().isZero(0.0));
  bool disc_moved = false;
  for (auto* p : store.all()) disc_moved = disc_moved || !p->grad().isZero(0.0);
  EXPECT_TRUE(disc_moved);
}

TEST(Alignment, AdversarialSignOnTwoClusters) {
  // frozen features: source around -1, target around +1
  nn::ParameterStore store;
  Rng rng(5);
  const Discriminator disc(store, DiscriminatorId::dec_k, 4, rng);
  const Matrix src = random_matrix(rng, 6, 4, -1.0), tgt = random_matrix(rng, 6, 4, 1.0);
  const DomainLabel labels[] = {DomainLabel::source, DomainLabel::target};

  auto bce = [&](const Matrix& s, const Matrix& g) {
    Tape t(false);
    const Var f[] = {t.constant(s), t.constant(g)};
    return loss_token_wise(t, disc, f, labels, 1.0).scalar();
  };

  Parameter fs("src", src), ft("tgt", tgt);
  store.zero_grad();
  Tape t;
  const Var f[] = {t.parameter(fs), t.parameter(ft)};
  t.backward(loss_token_wise(t, disc, f, labels, 1.0));

  // true BCE gradient w.r.t. features, without reversal
  Parameter ps("src", src), pt("tgt", tgt);
  std::vector<Matrix> disc_grads;
  for (auto* p : store.all()) disc_grads.push_back(p->grad());
  {
    Tape plain;
    const Var g[] = {plain.parameter(ps), plain.parameter(pt)};
    std::vector<Var> losses;
    for (int i = 0; i < 2; ++i) losses.push_back(ad::binary_cross_entropy(disc(plain, g[i]), label_value(labels[i])));
    plain.backward(ad::scale(ad::add(losses[0], losses[1]), 0.5));
  }

  const double before = bce(src, tgt);
  // feature update direction under gradient descent is -grad; it must increase BCE
  const double dot = -(fs.grad().cwiseProduct(ps.grad()).sum() + ft.grad().cwiseProduct(pt.grad()).sum());
  EXPECT_GT(dot, 0.0);
  EXPECT_GT(bce(src - 1e-3 * fs.grad(), tgt - 1e-3 * ft.grad()), before);

  // one discriminator descent step lowers BCE
  std::size_t i = 0;
  for (auto* p : store.all()) p->value() -= 1e-2 * disc_grads[i++];
  EXPECT_LT(bce(src, tgt), before);
}

TEST(ReversalStrength, LinearWarmup) {
  EXPECT_EQ(reversal_strength(0, 100, 1.0, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(reversal_strength(10, 100, 1.0, 0.2), 0.5);
  EXPECT_EQ(reversal_strength(20, 100, 1.0, 0.2), 1.0);
  EXPECT_EQ(reversal_strength(90, 100, 0.7, 0.2), 0.7);
  EXPECT_EQ(reversal_strength(0, 100, 0.7, 0.0), 0.7);
}

TEST(Discriminator, OutputsStrictlyInsideUnitInterval) {
  nn::ParameterStore store;
  Rng rng(6);
  const Discriminator disc(store, DiscriminatorId::enc_q, 8, rng);
  Tape t(false);
  const auto p = disc(t, t.constant(random_matrix(rng, 50, 8)));
  EXPECT_EQ(p.cols(), 1);
  EXPECT_GT(p.value().minCoeff(), 0.0);
  EXPECT_LT(p.value().maxCoeff(), 1.0);
  EXPECT_EQ(disc.parameter_prefix(), "disc.enc_q");
}

TEST(Alignment, GradientChecks) {
  for (const auto& [name, r] : suites::gradient_checks()) {
    if (name.find("discriminator") != std::string::npos || name.find("alignment") != std::string::npos) {
      EXPECT_TRUE(r.ok()) << name << ": " << r.worst;
    }
  }
}

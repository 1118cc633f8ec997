#include "suites.hpp"

#include "dapointr/datagen.hpp"
#include "dapointr/errors.hpp"
#include "dapointr/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dapointr;
using namespace dapointr::train;
namespace fs = std::filesystem;
using align::DiscriminatorId;

namespace {

struct Batches {
  std::vector<Sample> source, target;
};

Batches batches(std::uint64_t seed) {
  return {{suites::make_sample(seed + 1, 0, true), suites::make_sample(seed + 2, 4, true)},
          {suites::make_sample(seed + 3, 1, false), suites::make_sample(seed + 4, 2, false)}};
}

TrainConfig small_config() {
  TrainConfig c = suites::tiny_config();
  c.model.n_proxies = 16;
  c.model.embed_dim = 16;
  c.model.backbone_hidden = 16;
  c.model.ffn_dim = 32;
  c.model.head_hidden = 16;
  c.model.up_factor = 4;
  c.model.input_points = 128;
  return c;
}

std::vector<ad::Parameter*> disc_params(Trainer& t, DiscriminatorId id) {
  return t.model().parameters().with_prefix(t.model().discriminator(id).parameter_prefix() + ".");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path tiny_benchmark() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "dapointr_trainer_bench";
    fs::remove_all(d);
    datagen::BenchmarkOptions o;
    o.per_category = 1;
    o.complete_points = 256;
    o.source.resolution = 128;
    o.target.resolution = 96;
    o.target.noise_sigma = 0.01;
    o.seed = 3;
    datagen::build_benchmark(o, d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(LossReport, TotalMatchesWeightedSum) {
  Trainer t(small_config());
  const auto b = batches(10);
  const auto r = t.train_step(b.source, b.target);
  EXPECT_NEAR(r.total, total_loss(r, t.config().weights, t.config().pseudo_weight), 1e-12);
  for (double v : r.values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(r.enc_q, 0.0);
  EXPECT_GT(r.dec_k, 0.0);
  EXPECT_GT(r.cons, 0.0);
}

TEST(LossReport, UnitLossesContribute056) {
  LossReport r;
  r.enc_q = r.dec_q = r.enc_k = r.dec_k = r.cons = 1.0;
  EXPECT_NEAR(adaptation_contribution(r, LossWeights{}), 0.56, 1e-9);
  r.completion = 2.0;
  r.pseudo = 1.0;
  EXPECT_NEAR(total_loss(r, LossWeights{}, 0.5), 2.0 + 0.56 + 0.5, 1e-12);
  EXPECT_EQ(LossReport::columns().size(), r.values().size());
}

TEST(TrainStep, AllTogglesOffIsCompletionOnly) {
  TrainConfig c = small_config();
  c.align = {false, false, false, false};
  c.use_vpc = false;
  Trainer t(c);
  const auto b = batches(20);
  const auto r = t.train_step(b.source, b.target);
  EXPECT_EQ(r.total, r.completion);
  EXPECT_EQ(r.enc_q + r.dec_q + r.enc_k + r.dec_k + r.cons + r.pseudo, 0.0);
}

TEST(TrainStep, AnalyticLossesAtHalfProbability) {
  const auto o = suites::analytic_losses();
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(TrainStep, TokenDiscriminatorsSilentWhenBetaAndGammaZero) {
  TrainConfig c = small_config();
  c.weights.beta = 0.0;
  c.weights.gamma = 0.0;
  Trainer t(c);
  const auto b = batches(30);
  t.train_step(b.source, b.target);
  for (auto id : {DiscriminatorId::enc_k, DiscriminatorId::dec_k}) {
    for (auto* p : disc_params(t, id)) EXPECT_TRUE(p->grad().isZero(0.0)) << p->name();
  }
  bool any = false;
  for (auto* p : disc_params(t, DiscriminatorId::enc_q)) any = any || !p->grad().isZero(0.0);
  EXPECT_TRUE(any);
}

TEST(TrainStep, DisabledDiscriminatorsExactlyFrozen) {
  TrainConfig c = small_config();
  c.align = {false, false, false, false};
  Trainer t(c);
  const auto before = t.model().parameters().snapshot();
  const auto b = batches(40);
  for (int i = 0; i < 3; ++i) t.train_step(b.source, b.target);
  const auto after = t.model().parameters().snapshot();
  std::size_t frozen = 0, moved = 0;
  for (const auto& [name, value] : before) {
    if (name.rfind("disc.", 0) == 0) {
      EXPECT_EQ(after.at(name), value) << name;
      ++frozen;
    } else if (after.at(name) != value) {
      ++moved;
    }
  }
  EXPECT_GT(frozen, 0u);
  EXPECT_GT(moved, 0u);
}

TEST(TrainStep, AlphaIsLinear) {
  TrainConfig c1 = small_config(), c2 = small_config();
  c2.weights.alpha = 2.0 * c1.weights.alpha;
  Trainer t1(c1), t2(c2);
  const auto b = batches(50);
  const auto r1 = t1.evaluate_losses(b.source, b.target);
  const auto r2 = t2.evaluate_losses(b.source, b.target);
  auto others = [](const LossReport& r, const TrainConfig& c) {
    return r.completion + c.weights.beta * (r.enc_k + r.dec_k) + c.weights.gamma * r.cons + c.pseudo_weight * r.pseudo;
  };
  const double a1 = r1.total - others(r1, c1);
  const double a2 = r2.total - others(r2, c2);
  EXPECT_GT(a1, 0.0);
  EXPECT_NEAR(a2, 2.0 * a1, 1e-12 * std::abs(a1) + 1e-15);
}

TEST(TrainStep, NonFiniteLossAbortsBeforeUpdate) {
  Trainer t(small_config());
  t.model().discriminator(DiscriminatorId::enc_q).map().last().bias->value()(0, 0) = std::nan("");
  const auto before = t.model().parameters().snapshot();
  const auto b = batches(60);
  try {
    t.train_step(b.source, b.target);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_EQ(e.term(), "enc_q");
  }
  EXPECT_EQ(t.state().step, 0);
  EXPECT_EQ(t.optimizer().steps(), 0);
  const auto after = t.model().parameters().snapshot();
  for (const auto& [name, value] : before) {
    if (value.allFinite()) EXPECT_EQ(after.at(name), value) << name;
  }
}

TEST(TrainStep, SourceNeedsGroundTruth) {
  Trainer t(small_config());
  const auto b = batches(70);
  EXPECT_THROW(t.train_step(b.target, b.target), InvalidInput);
}

TEST(TrainStep, PseudoLabelsAfterFirstThreshold) {
  TrainConfig c = small_config();
  c.vpc_percentile = 100.0;  // every target prediction qualifies
  Trainer t(c);
  const auto b = batches(80);
  t.train_step(b.source, b.target);
  EXPECT_TRUE(t.state().pseudo_labels.empty());
  t.end_epoch();
  ASSERT_TRUE(t.state().threshold.has_value());
  EXPECT_EQ(t.state().epoch, 1);
  const auto r1 = t.train_step(b.source, b.target);
  EXPECT_EQ(r1.pseudo, 0.0);  // labels are harvested after the losses
  EXPECT_EQ(t.state().pseudo_labels.size(), 2u);
  const auto r2 = t.train_step(b.source, b.target);
  EXPECT_GT(r2.pseudo, 0.0);
}

TEST(Checkpoint, ResumeReproducesNextStep) {
  const fs::path ckpt = fs::temp_directory_path() / "dapointr_resume.ckpt";
  TrainConfig c = small_config();
  c.vpc_percentile = 60.0;
  Trainer a(c);
  a.state().total_steps = 20;
  const auto b = batches(90);
  a.train_step(b.source, b.target);
  a.end_epoch();
  a.train_step(b.source, b.target);
  a.save_checkpoint(ckpt);
  const auto labels_at_save = a.state().pseudo_labels.size();
  const auto next = a.train_step(b.source, b.target);

  const auto resumed = Trainer::load_checkpoint(ckpt);
  EXPECT_EQ(resumed->state().step, 2);
  EXPECT_EQ(resumed->state().pseudo_labels.size(), labels_at_save);
  const auto again = resumed->train_step(b.source, b.target);
  EXPECT_EQ(again.values(), next.values());
  EXPECT_EQ(resumed->model().parameters().snapshot(), a.model().parameters().snapshot());
  EXPECT_EQ(resumed->state().rng, a.state().rng);
}

TEST(Checkpoint, RejectsGarbage) {
  const fs::path p = fs::temp_directory_path() / "dapointr_garbage.ckpt";
  std::ofstream(p) << "not a checkpoint";
  EXPECT_THROW(Trainer::load_checkpoint(p), InvalidInput);
  EXPECT_THROW(Trainer::load_checkpoint(p.string() + ".missing"), InvalidInput);
}

TEST(Overfit, SingleBatch) {
  const auto r = suites::overfit(0, 200);
  EXPECT_LT(r.final, 0.1 * r.initial) << r.initial << " -> " << r.final;
}

TEST(Train, LogsCheckpointsAndDeterminism) {
  TrainConfig c = small_config();
  c.epochs = 2;
  const fs::path a = fs::temp_directory_path() / "dapointr_train_a";
  const fs::path b = fs::temp_directory_path() / "dapointr_train_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto ra = train::train(c, tiny_benchmark(), a);
  const auto rb = train::train(c, tiny_benchmark(), b);
  EXPECT_EQ(ra.steps, 2 * 3);  // 5 source pairs, batch 2
  EXPECT_EQ(slurp(a / "metrics.tsv"), slurp(b / "metrics.tsv"));
  EXPECT_EQ(slurp(a / "eval.tsv"), slurp(b / "eval.tsv"));
  EXPECT_EQ(ra.final_eval_cd, rb.final_eval_cd);
  EXPECT_TRUE(fs::exists(a / "last.ckpt"));
  EXPECT_TRUE(fs::exists(a / "best.ckpt"));

  std::istringstream log(slurp(a / "metrics.tsv"));
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "step\tepoch\tcompletion\tenc_q\tdec_q\tenc_k\tdec_k\tcons\tpseudo\ttotal\teta");
  int rows = 0;
  while (std::getline(log, line)) {
    std::istringstream fields(line);
    std::string f;
    int n = 0;
    while (std::getline(fields, f, '\t')) {
      EXPECT_NO_THROW((void)std::stod(f));
      ++n;
    }
    EXPECT_EQ(n, 11);
    ++rows;
  }
  EXPECT_EQ(rows, ra.steps);

  // the last checkpoint is already at the final epoch: resuming adds nothing
  const auto rc = train::train(c, tiny_benchmark(), a, a / "last.ckpt");
  EXPECT_EQ(rc.steps, ra.steps);
}

TEST(Train, MissingDataIsStartupError) {
  EXPECT_THROW(train::train(small_config(), "/nonexistent/bench", fs::temp_directory_path() / "dapointr_missing"),
               InvalidInput);
}

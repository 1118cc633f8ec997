#include "dapointr/trainer.hpp"

#include "dapointr/errors.hpp"
#include "dapointr/evaluate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dapointr::train {
namespace fs = std::filesystem;
using json = nlohmann::json;
using align::DiscriminatorId;
using ad::Var;
using ad::add;
using ad::scale;
using ad::sum;

const std::vector<std::string>& LossReport::columns() {
  static const std::vector<std::string> names{"completion", "enc_q", "dec_q", "enc_k", "dec_k",
                                              "cons",       "pseudo", "total", "eta"};
  return names;
}

std::vector<double> LossReport::values() const {
  return {completion, enc_q, dec_q, enc_k, dec_k, cons, pseudo, total, eta};
}

double adaptation_contribution(const LossReport& r, const LossWeights& w) {
  return w.alpha * (r.enc_q + r.dec_q) + w.beta * (r.enc_k + r.dec_k) + w.gamma * r.cons;
}

double total_loss(const LossReport& r, const LossWeights& w, double pseudo_weight) {
  return r.completion + adaptation_contribution(r, w) + pseudo_weight * r.pseudo;
}

namespace {

bool toggle_for(const AlignmentToggles& t, DiscriminatorId id) {
  switch (id) {
    case DiscriminatorId::enc_q: return t.dqfa_enc;
    case DiscriminatorId::dec_q: return t.dqfa_dec;
    case DiscriminatorId::enc_k: return t.ptfa_enc;
    case DiscriminatorId::dec_k: return t.ptfa_dec;
  }
  return false;
}

constexpr DiscriminatorId kAllDiscriminators[] = {DiscriminatorId::enc_q, DiscriminatorId::dec_q,
                                                  DiscriminatorId::enc_k, DiscriminatorId::dec_k};

PointCloud model_input(const Model& model, const PointCloud& partial) {
  return partial.size() == model.config().input_points ? partial : model.prepare_input(partial);
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  model_ = std::make_unique<Model>(cfg_.model, derive_seed(cfg_.seed, "model"));
  nn::AdamWConfig opt;
  opt.learning_rate = cfg_.learning_rate;
  opt.weight_decay = cfg_.weight_decay;
  optimizer_ = std::make_unique<nn::AdamW>(model_->parameters().all(), opt);
  for (auto id : kAllDiscriminators) {
    if (toggle_for(cfg_.align, id)) continue;
    for (const auto* p : model_->parameters().with_prefix(model_->discriminator(id).parameter_prefix() + ".")) {
      optimizer_->set_trainable(p, false);
    }
  }
  state_.rng.seed(derive_seed(cfg_.seed, "loop"));
}

LossReport Trainer::train_step(std::span<const Sample> source, std::span<const Sample> target) {
  return run(source, target, true);
}

LossReport Trainer::evaluate_losses(std::span<const Sample> source, std::span<const Sample> target) {
  return run(source, target, false);
}

LossReport Trainer::run(std::span<const Sample> source, std::span<const Sample> target, bool update) {
  if (source.empty()) throw InvalidInput("train_step: empty source batch");
  for (const auto& s : source) {
    if (!s.complete) throw InvalidInput("train_step: source sample '" + s.id + "' has no ground truth");
  }

  LossReport r;
  r.eta = align::reversal_strength(state_.step, std::max<long long>(1, state_.total_steps), cfg_.grl_eta_max,
                                   cfg_.grl_warmup_frac);
  ad::Tape tape(update);
  const Model& model = *model_;

  std::vector<ForwardPass> passes;
  std::vector<DomainLabel> labels;
  passes.reserve(source.size() + target.size());
  for (const auto& s : source) {
    passes.push_back(model.forward(tape, model_input(model, s.partial)));
    labels.push_back(DomainLabel::source);
  }
  // target clouds only matter through the alignment and voting terms
  if (!cfg_.align.any() && !cfg_.use_vpc) target = {};
  for (const auto& s : target) {
    passes.push_back(model.forward(tape, model_input(model, s.partial)));
    labels.push_back(DomainLabel::target);
  }
  const std::size_t n_src = source.size();

  std::vector<Var> completion;
  for (std::size_t i = 0; i < n_src; ++i) {
    completion.push_back(head::completion_loss(tape, passes[i].prediction, *source[i].complete));
  }
  Var total = scale(sum(ad::concat_rows(completion)), 1.0 / static_cast<double>(n_src));
  r.completion = total.scalar();

  auto add_term = [&](Var term, double weight, double& slot) {
    slot = term.scalar();
    total = add(total, scale(term, weight));
  };

  for (auto id : kAllDiscriminators) {
    if (!toggle_for(cfg_.align, id)) continue;
    std::vector<Var> feats;
    for (const auto& f : passes) {
      switch (id) {
        case DiscriminatorId::enc_q: feats.push_back(f.encoder.proxy_out); break;
        case DiscriminatorId::dec_q: feats.push_back(f.decoder.query_out); break;
        case DiscriminatorId::enc_k: feats.push_back(f.encoder.token_out); break;
        case DiscriminatorId::dec_k: feats.push_back(f.decoder.dynamic_out.back()); break;
      }
    }
    const auto& disc = model.discriminator(id);
    switch (id) {
      case DiscriminatorId::enc_q:
        add_term(align::loss_domain_token(tape, disc, feats, labels, r.eta), cfg_.weights.alpha, r.enc_q);
        break;
      case DiscriminatorId::dec_q:
        add_term(align::loss_domain_token(tape, disc, feats, labels, r.eta), cfg_.weights.alpha, r.dec_q);
        break;
      case DiscriminatorId::enc_k:
        add_term(align::loss_token_wise(tape, disc, feats, labels, r.eta), cfg_.weights.beta, r.enc_k);
        break;
      case DiscriminatorId::dec_k:
        add_term(align::loss_token_wise(tape, disc, feats, labels, r.eta), cfg_.weights.beta, r.dec_k);
        break;
    }
  }

  const bool pseudo_active =
      cfg_.use_vpc && state_.threshold.has_value() && state_.epoch >= static_cast<int>(cfg_.pseudo_start_epoch);
  if (cfg_.use_vpc) {
    std::vector<Var> cons;
    for (const auto& f : passes) cons.push_back(vpc::consistency_loss(tape, f.prediction));
    add_term(scale(sum(ad::concat_rows(cons)), 1.0 / static_cast<double>(cons.size())), cfg_.weights.gamma, r.cons);
    if (!target.empty()) {
      std::vector<Var> pseudo;
      for (std::size_t i = 0; i < target.size(); ++i) {
        pseudo.push_back(vpc::pseudo_label_loss(tape, passes[n_src + i].prediction, target[i].id,
                                                state_.pseudo_labels));
      }
      add_term(scale(sum(ad::concat_rows(pseudo)), 1.0 / static_cast<double>(pseudo.size())), cfg_.pseudo_weight,
               r.pseudo);
    }
  }
  r.total = total.scalar();

  const auto names = LossReport::columns();
  const auto vals = r.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (!std::isfinite(vals[i])) throw NonFiniteLoss(names[i], vals[i]);
  }
  if (!update) return r;

  if (cfg_.use_vpc) {
    std::vector<vpc::TargetPrediction> harvest;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const auto& pred = passes[n_src + i].prediction;
      std::vector<Points> layers;
      for (const auto& l : pred.per_layer) layers.emplace_back(l.value());
      const double score = vpc::consistency_score(layers);
      state_.scores.push(score);
      harvest.push_back({target[i].id, score, pred.final_points()});
    }
    if (pseudo_active) vpc::harvest_pseudo_labels(harvest, *state_.threshold, state_.epoch, state_.pseudo_labels);
  }

  model_->parameters().zero_grad();
  tape.backward(total);
  optimizer_->step();
  ++state_.step;
  return r;
}

void Trainer::end_epoch() {
  if (state_.scores.close_epoch()) {
    state_.threshold = vpc::update_threshold(state_.scores.window(), cfg_.vpc_percentile);
  }
  ++state_.epoch;
}

namespace {

json matrix_to_json(const ad::Matrix& m) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(m.size()) * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), m.data(), bytes.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", json::binary(std::move(bytes))}};
}

ad::Matrix matrix_from_json(const json& j) {
  ad::Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& bytes = j.at("data").get_binary();
  if (bytes.size() != static_cast<std::size_t>(m.size()) * sizeof(double)) {
    throw InvalidInput("checkpoint: matrix payload has the wrong size");
  }
  if (!bytes.empty()) std::memcpy(m.data(), bytes.data(), bytes.size());
  return m;
}

json matrices_to_json(const std::map<std::string, ad::Matrix>& ms) {
  json j = json::object();
  for (const auto& [k, v] : ms) j[k] = matrix_to_json(v);
  return j;
}

std::map<std::string, ad::Matrix> matrices_from_json(const json& j) {
  std::map<std::string, ad::Matrix> out;
  for (const auto& [k, v] : j.items()) out.emplace(k, matrix_from_json(v));
  return out;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& path) const {
  json j;
  j["format"] = "dapointr-checkpoint";
  j["version"] = 1;
  j["config"] = format_config(cfg_);
  j["params"] = matrices_to_json(model_->parameters().snapshot());
  const auto opt = optimizer_->state();
  j["optimizer"] = {{"t", opt.t}, {"m", matrices_to_json(opt.m)}, {"v", matrices_to_json(opt.v)}};
  j["step"] = state_.step;
  j["total_steps"] = state_.total_steps;
  j["epoch"] = state_.epoch;
  j["threshold"] = state_.threshold ? json(*state_.threshold) : json(nullptr);
  j["best_eval_cd"] = state_.best_eval_cd ? json(*state_.best_eval_cd) : json(nullptr);
  const auto window = state_.scores.window();
  const auto current = state_.scores.current();
  j["scores_window"] = std::vector<double>(window.begin(), window.end());
  j["scores_current"] = std::vector<double>(current.begin(), current.end());
  json pseudo = json::object();
  for (const auto& [id, label] : state_.pseudo_labels.entries()) {
    pseudo[id] = {{"points", matrix_to_json(label.cloud.points())}, {"score", label.score}, {"epoch", label.epoch}};
  }
  j["pseudo_labels"] = std::move(pseudo);
  std::ostringstream rng;
  rng << state_.rng;
  j["rng"] = rng.str();

  const auto bytes = json::to_cbor(j);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("cannot write checkpoint '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::unique_ptr<Trainer> Trainer::load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open checkpoint '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    throw InvalidInput("'" + path.string() + "' is not a checkpoint: " + e.what());
  }
  if (j.value("format", "") != "dapointr-checkpoint") {
    throw InvalidInput("'" + path.string() + "' is not a checkpoint");
  }
  auto t = std::make_unique<Trainer>(parse_config(j.at("config").get<std::string>()));
  t->model_->parameters().restore(matrices_from_json(j.at("params")));
  nn::AdamW::State opt;
  opt.t = j.at("optimizer").at("t").get<long long>();
  opt.m = matrices_from_json(j.at("optimizer").at("m"));
  opt.v = matrices_from_json(j.at("optimizer").at("v"));
  t->optimizer_->load_state(opt);
  auto& s = t->state_;
  s.step = j.at("step").get<long long>();
  s.total_steps = j.at("total_steps").get<long long>();
  s.epoch = j.at("epoch").get<int>();
  if (!j.at("threshold").is_null()) s.threshold = j.at("threshold").get<double>();
  if (!j.at("best_eval_cd").is_null()) s.best_eval_cd = j.at("best_eval_cd").get<double>();
  s.scores.restore(j.at("scores_window").get<std::vector<double>>(),
                   j.at("scores_current").get<std::vector<double>>());
  for (const auto& [id, e] : j.at("pseudo_labels").items()) {
    s.pseudo_labels.put(id, {PointCloud(Points(matrix_from_json(e.at("points")))), e.at("score").get<double>(),
                             e.at("epoch").get<int>()});
  }
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> s.rng;
  return t;
}

TrainResult train(const TrainConfig& cfg, const fs::path& data, const fs::path& out,
                  const std::optional<fs::path>& resume, std::ostream* progress) {
  const auto source = load_split(data / "source" / "train", true, cfg.model.input_points);
  const auto target = load_split(data / "target" / "train", false, cfg.model.input_points);
  const auto eval_set = load_split(data / "target" / "eval", true);
  fs::create_directories(out);

  std::unique_ptr<Trainer> trainer = resume ? Trainer::load_checkpoint(*resume) : std::make_unique<Trainer>(cfg);
  const TrainConfig& c = trainer->config();
  const std::size_t batches = (source.size() + c.batch_size - 1) / c.batch_size;
  auto& st = trainer->state();
  st.total_steps = static_cast<long long>(batches * c.epochs);

  const bool fresh = !resume;
  std::ofstream metrics(out / "metrics.tsv", fresh ? std::ios::trunc : std::ios::app);
  std::ofstream evals(out / "eval.tsv", fresh ? std::ios::trunc : std::ios::app);
  if (!metrics || !evals) throw InvalidInput("cannot write logs in '" + out.string() + "'");
  metrics.precision(17);
  evals.precision(17);
  if (fresh) {
    metrics << "step\tepoch";
    for (const auto& name : LossReport::columns()) metrics << '\t' << name;
    metrics << '\n';
    evals << "epoch\tcd\n";
  }

  TrainResult result;
  const eval::Metric cd_only[] = {eval::Metric::cd};
  const eval::Completer completer = [&](const PointCloud& p) { return trainer->model().complete(p); };

  std::vector<std::size_t> src_order(source.size()), tgt_order(target.size());
  while (st.epoch < static_cast<int>(c.epochs)) {
    std::iota(src_order.begin(), src_order.end(), 0);
    std::iota(tgt_order.begin(), tgt_order.end(), 0);
    std::shuffle(src_order.begin(), src_order.end(), st.rng);
    std::shuffle(tgt_order.begin(), tgt_order.end(), st.rng);
    std::size_t tgt_cursor = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<Sample> sb, tb;
      for (std::size_t k = b * c.batch_size; k < std::min(source.size(), (b + 1) * c.batch_size); ++k) {
        sb.push_back(source[src_order[k]]);
      }
      for (std::size_t k = 0; k < c.batch_size && !target.empty(); ++k) {
        tb.push_back(target[tgt_order[tgt_cursor++ % target.size()]]);
      }
      const LossReport r = trainer->train_step(sb, tb);
      metrics << st.step << '\t' << st.epoch;
      for (double v : r.values()) metrics << '\t' << v;
      metrics << '\n';
    }
    metrics.flush();
    const int finished = st.epoch;
    trainer->end_epoch();

    const bool last = st.epoch == static_cast<int>(c.epochs);
    if (last || st.epoch % static_cast<int>(c.eval_every) == 0) {
      const double cd = eval::evaluate(completer, eval_set, cd_only).average.values.at(eval::Metric::cd);
      evals << finished << '\t' << cd << '\n';
      evals.flush();
      if (progress) *progress << "epoch " << finished << "  target CD x1e4 " << cd << '\n';
      if (!st.best_eval_cd || cd < *st.best_eval_cd) {
        st.best_eval_cd = cd;
        trainer->save_checkpoint(out / "best.ckpt");
      }
      if (last) result.final_eval_cd = cd;
    }
    trainer->save_checkpoint(out / "last.ckpt");
  }
  result.best_eval_cd = st.best_eval_cd.value_or(result.final_eval_cd);
  result.steps = st.step;
  return result;
}

}  // namespace dapointr::train

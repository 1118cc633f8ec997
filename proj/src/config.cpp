#include "dapointr/config.hpp"

#include "dapointr/errors.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dapointr {

backbone::BackboneConfig ModelConfig::backbone_config() const {
  return {n_proxies, embed_dim, knn_k, backbone_hidden};
}

seq2seq::TransformerConfig ModelConfig::transformer_config() const {
  return {embed_dim, heads, enc_layers, dec_layers, ffn_dim, n_proxies, pooling};
}

head::HeadConfig ModelConfig::head_config() const { return {head, up_factor, head_hidden}; }

void TrainConfig::validate() const {
  const auto& m = model;
  if (m.n_proxies == 0 || m.embed_dim == 0 || m.knn_k == 0 || m.heads == 0 || m.dec_layers == 0 ||
      m.up_factor == 0 || m.ffn_dim == 0 || m.backbone_hidden == 0 || m.head_hidden == 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (m.embed_dim % m.heads != 0) throw ConfigError("embed_dim must be divisible by heads");
  if (m.input_points < m.n_proxies || m.input_points < m.knn_k) {
    throw ConfigError("input_points must be >= n_proxies and >= knn_k");
  }
  if (!(learning_rate > 0) || !(weight_decay >= 0)) throw ConfigError("learning_rate > 0, weight_decay >= 0 required");
  if (batch_size == 0 || epochs == 0 || eval_every == 0) throw ConfigError("batch_size, epochs, eval_every must be >= 1");
  if (!(weights.alpha >= 0) || !(weights.beta >= 0) || !(weights.gamma >= 0) || !(pseudo_weight >= 0)) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (!(grl_eta_max >= 0) || !(grl_warmup_frac >= 0 && grl_warmup_frac <= 1)) throw ConfigError("invalid reversal schedule");
  if (!(vpc_percentile >= 0 && vpc_percentile <= 100)) throw ConfigError("vpc_percentile must lie in [0, 100]");
}

namespace {

template <typename T>
void parse_number(const std::string& key, const std::string& v, T& out) {
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + v + "' for key '" + key + "'");
  }
}

void parse_bool(const std::string& key, const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "on") out = true;
  else if (v == "false" || v == "0" || v == "off") out = false;
  else throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter num(T TrainConfig::*field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) { parse_number(k, v, c.*field); };
}

template <typename T>
Setter model_num(T ModelConfig::*field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) { parse_number(k, v, c.model.*field); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_proxies", model_num(&ModelConfig::n_proxies)},
      {"embed_dim", model_num(&ModelConfig::embed_dim)},
      {"knn_k", model_num(&ModelConfig::knn_k)},
      {"backbone_hidden", model_num(&ModelConfig::backbone_hidden)},
      {"enc_layers", model_num(&ModelConfig::enc_layers)},
      {"dec_layers", model_num(&ModelConfig::dec_layers)},
      {"heads", model_num(&ModelConfig::heads)},
      {"ffn_dim", model_num(&ModelConfig::ffn_dim)},
      {"pooling",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "max") c.model.pooling = seq2seq::Pooling::max;
         else if (v == "mean") c.model.pooling = seq2seq::Pooling::mean;
         else throw ConfigError("invalid value '" + v + "' for key '" + k + "'");
       }},
      {"head", [](TrainConfig& c, const std::string&, const std::string& v) { c.model.head = head::parse_refiner(v); }},
      {"up_factor", model_num(&ModelConfig::up_factor)},
      {"head_hidden", model_num(&ModelConfig::head_hidden)},
      {"input_points", model_num(&ModelConfig::input_points)},
      {"seed", num(&TrainConfig::seed)},
      {"epochs", num(&TrainConfig::epochs)},
      {"batch_size", num(&TrainConfig::batch_size)},
      {"learning_rate", num(&TrainConfig::learning_rate)},
      {"weight_decay", num(&TrainConfig::weight_decay)},
      {"alpha", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_number(k, v, c.weights.alpha); }},
      {"beta", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_number(k, v, c.weights.beta); }},
      {"gamma", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_number(k, v, c.weights.gamma); }},
      {"grl_eta_max", num(&TrainConfig::grl_eta_max)},
      {"grl_warmup_frac", num(&TrainConfig::grl_warmup_frac)},
      {"use_dqfa_enc", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_bool(k, v, c.align.dqfa_enc); }},
      {"use_dqfa_dec", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_bool(k, v, c.align.dqfa_dec); }},
      {"use_ptfa_enc", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_bool(k, v, c.align.ptfa_enc); }},
      {"use_ptfa_dec", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_bool(k, v, c.align.ptfa_dec); }},
      {"use_vpc", [](TrainConfig& c, const std::string& k, const std::string& v) { parse_bool(k, v, c.use_vpc); }},
      {"vpc_percentile", num(&TrainConfig::vpc_percentile)},
      {"pseudo_weight", num(&TrainConfig::pseudo_weight)},
      {"pseudo_start_epoch", num(&TrainConfig::pseudo_start_epoch)},
      {"eval_every", num(&TrainConfig::eval_every)},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_config(const std::string& text, TrainConfig cfg) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const auto& m = c.model;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "n_proxies = " << m.n_proxies << "\nembed_dim = " << m.embed_dim << "\nknn_k = " << m.knn_k
    << "\nbackbone_hidden = " << m.backbone_hidden << "\nenc_layers = " << m.enc_layers
    << "\ndec_layers = " << m.dec_layers << "\nheads = " << m.heads << "\nffn_dim = " << m.ffn_dim
    << "\npooling = " << (m.pooling == seq2seq::Pooling::max ? "max" : "mean")
    << "\nhead = " << head::refiner_name(m.head) << "\nup_factor = " << m.up_factor
    << "\nhead_hidden = " << m.head_hidden << "\ninput_points = " << m.input_points << "\nseed = " << c.seed
    << "\nepochs = " << c.epochs << "\nbatch_size = " << c.batch_size << "\nlearning_rate = " << c.learning_rate
    << "\nweight_decay = " << c.weight_decay << "\nalpha = " << c.weights.alpha << "\nbeta = " << c.weights.beta
    << "\ngamma = " << c.weights.gamma << "\ngrl_eta_max = " << c.grl_eta_max
    << "\ngrl_warmup_frac = " << c.grl_warmup_frac << "\nuse_dqfa_enc = " << b(c.align.dqfa_enc)
    << "\nuse_dqfa_dec = " << b(c.align.dqfa_dec) << "\nuse_ptfa_enc = " << b(c.align.ptfa_enc)
    << "\nuse_ptfa_dec = " << b(c.align.ptfa_dec) << "\nuse_vpc = " << b(c.use_vpc)
    << "\nvpc_percentile = " << c.vpc_percentile << "\npseudo_weight = " << c.pseudo_weight
    << "\npseudo_start_epoch = " << c.pseudo_start_epoch << "\neval_every = " << c.eval_every << '\n';
  return o.str();
}

void apply_ablation(TrainConfig& cfg, const std::string& component) {
  if (component == "ptfa") {
    cfg.align.ptfa_enc = cfg.align.ptfa_dec = false;
  } else if (component == "dqfa") {
    cfg.align.dqfa_enc = cfg.align.dqfa_dec = false;
  } else if (component == "vpc") {
    cfg.use_vpc = false;
  } else {
    throw ConfigError("unknown ablation '" + component + "' (expected ptfa, dqfa or vpc)");
  }
}

std::vector<NamedVariant> ablation_variants(const TrainConfig& base) {
  auto make = [&](std::string name, std::vector<std::string> off) {
    TrainConfig c = base;
    c.align = AlignmentToggles{};
    c.use_vpc = true;
    for (const auto& o : off) apply_ablation(c, o);
    return NamedVariant{std::move(name), c};
  };
  return {make("source_only", {"ptfa", "dqfa", "vpc"}), make("ptfa", {"dqfa", "vpc"}),
          make("dqfa", {"ptfa", "vpc"}), make("ptfa_dqfa", {"vpc"}), make("full", {})};
}

}  // namespace dapointr

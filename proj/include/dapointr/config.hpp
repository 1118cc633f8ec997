#pragma once

#include "dapointr/backbone.hpp"
#include "dapointr/head.hpp"
#include "dapointr/seq2seq.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dapointr {

struct ModelConfig {
  std::size_t n_proxies = 64;
  std::size_t embed_dim = 128;
  std::size_t knn_k = 8;
  std::size_t backbone_hidden = 64;
  std::size_t enc_layers = 4;
  std::size_t dec_layers = 4;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  seq2seq::Pooling pooling = seq2seq::Pooling::max;
  head::RefinerKind head = head::RefinerKind::spd;
  std::size_t up_factor = 8;
  std::size_t head_hidden = 64;
  std::size_t input_points = 2048;

  backbone::BackboneConfig backbone_config() const;
  seq2seq::TransformerConfig transformer_config() const;
  head::HeadConfig head_config() const;
};

/// The four individually switchable alignment branches.
struct AlignmentToggles {
  bool dqfa_enc = true;  // domain proxy (encoder slot 0)
  bool dqfa_dec = true;  // domain query (decoder slot 0)
  bool ptfa_enc = true;  // point proxies
  bool ptfa_dec = true;  // dynamic queries

  bool any() const { return dqfa_enc || dqfa_dec || ptfa_enc || ptfa_dec; }
};

struct LossWeights {
  double alpha = 0.025;  // domain-token terms
  double beta = 0.25;    // token-wise terms
  double gamma = 0.01;   // voted consistency
};

struct TrainConfig {
  ModelConfig model;
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t batch_size = 2;
  double learning_rate = 2e-4;
  double weight_decay = 5e-5;
  LossWeights weights;
  double grl_eta_max = 1.0;
  double grl_warmup_frac = 0.2;
  AlignmentToggles align;
  bool use_vpc = true;
  double vpc_percentile = 30.0;
  double pseudo_weight = 0.5;
  std::size_t pseudo_start_epoch = 1;
  std::size_t eval_every = 1;

  void validate() const;
};

/// Flat "key = value" text; '#' starts a comment. Unknown keys are errors.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path);
std::string format_config(const TrainConfig& cfg);

/// Disables one component group: "ptfa", "dqfa" or "vpc".
void apply_ablation(TrainConfig& cfg, const std::string& component);

struct NamedVariant {
  std::string name;
  TrainConfig config;
};

/// Source-only baseline, +PTFA, +DQFA, PTFA+DQFA and the full method.
std::vector<NamedVariant> ablation_variants(const TrainConfig& base);

}  // namespace dapointr

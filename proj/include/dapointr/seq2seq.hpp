#pragma once

#include "dapointr/backbone.hpp"
#include "dapointr/nn.hpp"

#include <vector>

namespace dapointr::seq2seq {

using ad::Matrix;
using ad::Tape;
using ad::Var;

enum class Pooling { max, mean };

struct TransformerConfig {
  std::size_t embed_dim = 128;
  std::size_t heads = 4;
  std::size_t enc_layers = 4;
  std::size_t dec_layers = 4;
  std::size_t ffn_dim = 256;
  std::size_t n_queries = 64;
  Pooling pooling = Pooling::max;
};

/// Collects softmax attention matrices (one per head per attention call) when
/// passed to encode/decode.
struct AttentionLog {
  std::vector<Matrix> self_attention;
  std::vector<Matrix> cross_attention;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
                     Eigen::Index heads, Rng& rng);

  /// Queries from `x`, keys/values from `context`.
  Var operator()(Tape& tape, Var x, Var context, std::vector<Matrix>* weights = nullptr) const;

 private:
  nn::Linear q_, k_, v_, o_;
  Eigen::Index heads_ = 1;
};

/// Learned slot-0 tokens shared by every sample: the encoder's domain proxy
/// and the decoder's domain query, each with its own positional vector.
struct DomainTokens {
  ad::Parameter* enc_token = nullptr;
  ad::Parameter* enc_position = nullptr;
  ad::Parameter* dec_token = nullptr;
  ad::Parameter* dec_position = nullptr;

  static DomainTokens create(nn::ParameterStore& store, const std::string& prefix, Eigen::Index dim,
                             Rng& rng);
};

struct EncoderOutput {
  Var proxy_out;       // 1 x d, encoded slot 0
  Var token_out;       // N x d
  Var global_feature;  // 1 x d, pooled over token_out
  Var positions;       // N x d, decoder-side positional vectors
};

struct QueryOutput {
  Var coarse;   // N x 3
  Var queries;  // N x d
};

struct DecoderOutput {
  Var query_out;                 // 1 x d, decoded slot 0 after the last layer
  std::vector<Var> dynamic_out;  // per layer, N x d
};

/// [tokens] and [positions] with the domain slot prepended, summed: (N+1) x d.
Var build_encoder_input(Tape& tape, const backbone::TokenSequence& seq, const DomainTokens& dt);
Var build_decoder_input(Tape& tape, Var queries, Var positions, const DomainTokens& dt);

class Seq2Seq {
 public:
  Seq2Seq(nn::ParameterStore& store, const TransformerConfig& cfg, Rng& rng,
          const std::string& prefix = "transformer");

  Var build_encoder_input(Tape& tape, const backbone::TokenSequence& seq) const;
  EncoderOutput encode(Tape& tape, Var x, AttentionLog* log = nullptr) const;
  /// Encodes a sequence that has no domain slot (all rows are tokens).
  Var encode_tokens_only(Tape& tape, Var x) const;
  QueryOutput generate_queries(Tape& tape, const EncoderOutput& enc) const;
  Var build_decoder_input(Tape& tape, Var queries, Var positions) const;
  DecoderOutput decode(Tape& tape, Var x, const EncoderOutput& enc, AttentionLog* log = nullptr) const;

  const TransformerConfig& config() const noexcept { return cfg_; }
  const DomainTokens& domain_tokens() const noexcept { return tokens_; }

 private:
  struct EncoderBlock {
    nn::LayerNorm norm1, norm2;
    MultiHeadAttention attn;
    nn::Mlp ffn;
  };
  struct DecoderBlock {
    nn::LayerNorm norm1, norm2, norm3;
    MultiHeadAttention self_attn, cross_attn;
    nn::Mlp ffn;
  };

  Var run_encoder(Tape& tape, Var x, AttentionLog* log) const;

  TransformerConfig cfg_;
  DomainTokens tokens_;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  nn::LayerNorm enc_norm_, dec_norm_;
  nn::Mlp position_map_;
  nn::Mlp coarse_map_;
  nn::Mlp query_map_;
};

}  // namespace dapointr::seq2seq

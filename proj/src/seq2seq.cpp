#include "dapointr/seq2seq.hpp"

#include "dapointr/errors.hpp"

#include <cmath>

namespace dapointr::seq2seq {

MultiHeadAttention::MultiHeadAttention(nn::ParameterStore& store, const std::string& name,
                                       Eigen::Index dim, Eigen::Index heads, Rng& rng)
    : q_(nn::Linear::create(store, name + ".q", dim, dim, rng)),
      k_(nn::Linear::create(store, name + ".k", dim, dim, rng)),
      v_(nn::Linear::create(store, name + ".v", dim, dim, rng)),
      o_(nn::Linear::create(store, name + ".o", dim, dim, rng)),
      heads_(heads) {
  if (heads <= 0 || dim % heads != 0) throw ConfigError("embed_dim must be divisible by heads");
}

Var MultiHeadAttention::operator()(Tape& tape, Var x, Var context, std::vector<Matrix>* weights) const {
  const Eigen::Index dim = q_.out_dim();
  const Eigen::Index hd = dim / heads_;
  Var q = q_(tape, x);
  Var k = k_(tape, context);
  Var v = v_(tape, context);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads_));
  for (Eigen::Index h = 0; h < heads_; ++h) {
    Var qh = ad::slice_cols(q, h * hd, hd);
    Var kh = ad::slice_cols(k, h * hd, hd);
    Var vh = ad::slice_cols(v, h * hd, hd);
    Var attn = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_scale));
    if (weights != nullptr) weights->push_back(attn.value());
    outs.push_back(ad::matmul(attn, vh));
  }
  return o_(tape, heads_ == 1 ? outs.front() : ad::concat_cols(outs));
}

DomainTokens DomainTokens::create(nn::ParameterStore& store, const std::string& prefix, Eigen::Index dim,
                                  Rng& rng) {
  DomainTokens t;
  t.enc_token = &store.create(prefix + ".enc_token", nn::normal_matrix(1, dim, 0.02, rng));
  t.enc_position = &store.create(prefix + ".enc_position", nn::normal_matrix(1, dim, 0.02, rng));
  t.dec_token = &store.create(prefix + ".dec_token", nn::normal_matrix(1, dim, 0.02, rng));
  t.dec_position = &store.create(prefix + ".dec_position", nn::normal_matrix(1, dim, 0.02, rng));
  return t;
}

Var build_encoder_input(Tape& tape, const backbone::TokenSequence& seq, const DomainTokens& dt) {
  const Eigen::Index d = dt.enc_token->value().cols();
  if (seq.tokens.cols() != d || seq.positions.cols() != d || seq.tokens.rows() != seq.positions.rows()) {
    throw ConfigError("build_encoder_input: token/position dimension mismatch with domain proxy");
  }
  Var tokens = ad::concat_rows({tape.parameter(*dt.enc_token), seq.tokens});
  Var positions = ad::concat_rows({tape.parameter(*dt.enc_position), seq.positions});
  return ad::add(tokens, positions);
}

Var build_decoder_input(Tape& tape, Var queries, Var positions, const DomainTokens& dt) {
  const Eigen::Index d = dt.dec_token->value().cols();
  if (queries.cols() != d || positions.cols() != d || queries.rows() != positions.rows()) {
    throw ConfigError("build_decoder_input: query/position dimension mismatch with domain query");
  }
  Var q = ad::concat_rows({tape.parameter(*dt.dec_token), queries});
  Var p = ad::concat_rows({tape.parameter(*dt.dec_position), positions});
  return ad::add(q, p);
}

Seq2Seq::Seq2Seq(nn::ParameterStore& store, const TransformerConfig& cfg, Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
  if (cfg.embed_dim == 0 || cfg.ffn_dim == 0 || cfg.n_queries == 0 || cfg.dec_layers == 0) {
    throw ConfigError("transformer sizes must be positive (dec_layers >= 1)");
  }
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto f = static_cast<Eigen::Index>(cfg.ffn_dim);
  const auto h = static_cast<Eigen::Index>(cfg.heads);
  const auto n = static_cast<Eigen::Index>(cfg.n_queries);
  tokens_ = DomainTokens::create(store, prefix + ".domain", d, rng);
  for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
    const std::string p = prefix + ".enc" + std::to_string(i);
    encoder_.push_back(EncoderBlock{nn::LayerNorm::create(store, p + ".norm1", d),
                                    nn::LayerNorm::create(store, p + ".norm2", d),
                                    MultiHeadAttention(store, p + ".attn", d, h, rng),
                                    nn::Mlp::create(store, p + ".ffn", {d, f, d}, rng)});
  }
  for (std::size_t i = 0; i < cfg.dec_layers; ++i) {
    const std::string p = prefix + ".dec" + std::to_string(i);
    decoder_.push_back(DecoderBlock{nn::LayerNorm::create(store, p + ".norm1", d),
                                    nn::LayerNorm::create(store, p + ".norm2", d),
                                    nn::LayerNorm::create(store, p + ".norm3", d),
                                    MultiHeadAttention(store, p + ".self", d, h, rng),
                                    MultiHeadAttention(store, p + ".cross", d, h, rng),
                                    nn::Mlp::create(store, p + ".ffn", {d, f, d}, rng)});
  }
  enc_norm_ = nn::LayerNorm::create(store, prefix + ".enc_norm", d);
  dec_norm_ = nn::LayerNorm::create(store, prefix + ".dec_norm", d);
  position_map_ = nn::Mlp::create(store, prefix + ".dec_pos", {d, d, d}, rng);
  coarse_map_ = nn::Mlp::create(store, prefix + ".coarse", {d, f, 3 * n}, rng);
  query_map_ = nn::Mlp::create(store, prefix + ".query", {3 + d, d, d}, rng);
}

Var Seq2Seq::build_encoder_input(Tape& tape, const backbone::TokenSequence& seq) const {
  return seq2seq::build_encoder_input(tape, seq, tokens_);
}

Var Seq2Seq::build_decoder_input(Tape& tape, Var queries, Var positions) const {
  return seq2seq::build_decoder_input(tape, queries, positions, tokens_);
}

Var Seq2Seq::run_encoder(Tape& tape, Var x, AttentionLog* log) const {
  for (const auto& b : encoder_) {
    Var h = b.norm1(tape, x);
    x = ad::add(x, b.attn(tape, h, h, log ? &log->self_attention : nullptr));
    x = ad::add(x, b.ffn(tape, b.norm2(tape, x)));
  }
  return enc_norm_(tape, x);
}

EncoderOutput Seq2Seq::encode(Tape& tape, Var x, AttentionLog* log) const {
  if (x.cols() != static_cast<Eigen::Index>(cfg_.embed_dim) || x.rows() < 2) {
    throw ConfigError("encode: expected (N+1) x embed_dim input");
  }
  Var y = run_encoder(tape, x, log);
  EncoderOutput out;
  out.proxy_out = ad::slice_rows(y, 0, 1);
  out.token_out = ad::slice_rows(y, 1, y.rows() - 1);
  out.global_feature = cfg_.pooling == Pooling::max ? ad::max_rows(out.token_out) : ad::mean_rows(out.token_out);
  out.positions = position_map_(tape, out.token_out);
  return out;
}

Var Seq2Seq::encode_tokens_only(Tape& tape, Var x) const { return run_encoder(tape, x, nullptr); }

QueryOutput Seq2Seq::generate_queries(Tape& tape, const EncoderOutput& enc) const {
  const auto n = static_cast<Eigen::Index>(cfg_.n_queries);
  QueryOutput q;
  q.coarse = ad::reshape(coarse_map_(tape, enc.global_feature), n, 3);
  q.queries = query_map_(tape, ad::concat_cols({q.coarse, ad::tile_rows(enc.global_feature, n)}));
  return q;
}

DecoderOutput Seq2Seq::decode(Tape& tape, Var x, const EncoderOutput& enc, AttentionLog* log) const {
  if (x.cols() != static_cast<Eigen::Index>(cfg_.embed_dim) || x.rows() < 2) {
    throw ConfigError("decode: expected (N+1) x embed_dim input");
  }
  DecoderOutput out;
  const Eigen::Index n = x.rows() - 1;
  for (const auto& b : decoder_) {
    Var h = b.norm1(tape, x);
    x = ad::add(x, b.self_attn(tape, h, h, log ? &log->self_attention : nullptr));
    x = ad::add(x, b.cross_attn(tape, b.norm2(tape, x), enc.token_out, log ? &log->cross_attention : nullptr));
    x = ad::add(x, b.ffn(tape, b.norm3(tape, x)));
    Var normed = dec_norm_(tape, x);
    out.dynamic_out.push_back(ad::slice_rows(normed, 1, n));
    if (&b == &decoder_.back()) out.query_out = ad::slice_rows(normed, 0, 1);
  }
  return out;
}

}  // namespace dapointr::seq2seq

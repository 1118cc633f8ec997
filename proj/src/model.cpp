#include "dapointr/model.hpp"

#include "dapointr/vpc.hpp"

namespace dapointr {

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  Rng rng(derive_seed(init_seed, "init"));
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  backbone_ = std::make_unique<backbone::Backbone>(store_, cfg.backbone_config(), rng);
  transformer_ = std::make_unique<seq2seq::Seq2Seq>(store_, cfg.transformer_config(), rng);
  predictor_ = head::LayerPredictor(store_, "head.layer", d, static_cast<Eigen::Index>(cfg.head_hidden), rng);
  refiner_ = head::make_refiner(store_, "head.refine", d, cfg.head_config(), rng);
  using align::DiscriminatorId;
  for (auto id : {DiscriminatorId::enc_q, DiscriminatorId::dec_q, DiscriminatorId::enc_k, DiscriminatorId::dec_k}) {
    discriminators_[static_cast<std::size_t>(id)] = align::Discriminator(store_, id, d, rng);
  }
}

ForwardPass Model::forward(ad::Tape& tape, const PointCloud& partial) const {
  ForwardPass f;
  f.proxies = backbone_->extract_proxies(tape, partial);
  f.encoder = transformer_->encode(tape, transformer_->build_encoder_input(tape, f.proxies));
  f.queries = transformer_->generate_queries(tape, f.encoder);
  f.decoder = transformer_->decode(
      tape, transformer_->build_decoder_input(tape, f.queries.queries, f.encoder.positions), f.encoder);
  auto& p = f.prediction;
  p.coarse = f.queries.coarse;
  p.per_layer = predictor_.predict_per_layer(tape, f.decoder, p.coarse);
  p.voted_mean = vpc::vote_mean(p.per_layer);
  p.final_cloud = refiner_->refine(tape, f.decoder.dynamic_out.back(), p.coarse);
  return f;
}

PointCloud Model::prepare_input(const PointCloud& partial) const {
  return geometry::resample(partial, cfg_.input_points, derive_seed(partial.size(), "input"));
}

PointCloud Model::complete(const PointCloud& partial) const {
  ad::Tape tape(false);
  return forward(tape, prepare_input(partial)).prediction.final_points();
}

Eigen::RowVectorXd Model::encoder_feature(const PointCloud& partial) const {
  ad::Tape tape(false);
  const auto proxies = backbone_->extract_proxies(tape, prepare_input(partial));
  const auto enc = transformer_->encode(tape, transformer_->build_encoder_input(tape, proxies));
  return enc.global_feature.value().row(0);
}

}  // namespace dapointr

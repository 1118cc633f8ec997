#pragma once

#include "dapointr/align.hpp"
#include "dapointr/backbone.hpp"
#include "dapointr/config.hpp"
#include "dapointr/head.hpp"
#include "dapointr/seq2seq.hpp"

#include <array>
#include <memory>

namespace dapointr {

/// Intermediate values of one forward pass, all living on the caller's tape.
struct ForwardPass {
  backbone::TokenSequence proxies;
  seq2seq::EncoderOutput encoder;
  seq2seq::QueryOutput queries;
  seq2seq::DecoderOutput decoder;
  head::PredictionSet prediction;
};

/// Completion network plus the four alignment discriminators, all owned by
/// one ParameterStore. Not copyable: layers point into the store.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ForwardPass forward(ad::Tape& tape, const PointCloud& partial) const;

  /// Resamples to input_points and returns the final dense cloud.
  PointCloud complete(const PointCloud& partial) const;
  /// Pooled encoder feature of a (resampled) partial.
  Eigen::RowVectorXd encoder_feature(const PointCloud& partial) const;
  PointCloud prepare_input(const PointCloud& partial) const;

  const ModelConfig& config() const noexcept { return cfg_; }
  nn::ParameterStore& parameters() noexcept { return store_; }
  const nn::ParameterStore& parameters() const noexcept { return store_; }

  const backbone::Backbone& backbone() const noexcept { return *backbone_; }
  const seq2seq::Seq2Seq& transformer() const noexcept { return *transformer_; }
  const head::LayerPredictor& layer_predictor() const noexcept { return predictor_; }
  const head::Refiner& refiner() const noexcept { return *refiner_; }
  const align::Discriminator& discriminator(align::DiscriminatorId id) const {
    return discriminators_[static_cast<std::size_t>(id)];
  }

 private:
  ModelConfig cfg_;
  nn::ParameterStore store_;
  std::unique_ptr<backbone::Backbone> backbone_;
  std::unique_ptr<seq2seq::Seq2Seq> transformer_;
  head::LayerPredictor predictor_;
  std::unique_ptr<head::Refiner> refiner_;
  std::array<align::Discriminator, 4> discriminators_;
};

}  // namespace dapointr

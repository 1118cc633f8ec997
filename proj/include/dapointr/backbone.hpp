#pragma once

#include "dapointr/geometry.hpp"
#include "dapointr/nn.hpp"

namespace dapointr::backbone {

struct BackboneConfig {
  std::size_t n_proxies = 64;
  std::size_t embed_dim = 128;
  std::size_t knn_k = 8;
  std::size_t hidden_dim = 64;  // width of the first edge-conv stage
};

/// Point-proxy sequence: N feature tokens, N positional vectors (both N x d)
/// and the N proxy centers they summarize.
struct TokenSequence {
  ad::Var tokens;
  ad::Var positions;
  Points centers;

  std::size_t size() const { return static_cast<std::size_t>(centers.rows()); }
};

/// FPS centers followed by two edge-convolution stages:
///   stage 1 over each center's k raw-point neighbours, edge input
///     [center_xyz, neighbour_xyz - center_xyz];
///   stage 2 over each center's k nearest centers, edge input
///     [f_center, f_neighbour - f_center];
/// each stage is a shared MLP followed by a max over the neighbourhood.
/// Positions are a two-layer MLP of the raw center coordinates.
class Backbone {
 public:
  Backbone(nn::ParameterStore& store, const BackboneConfig& cfg, Rng& rng,
           const std::string& prefix = "backbone");

  TokenSequence extract_proxies(ad::Tape& tape, const PointCloud& partial) const;

  const BackboneConfig& config() const noexcept { return cfg_; }
  const nn::Mlp& local_stage() const noexcept { return stage1_; }

 private:
  BackboneConfig cfg_;
  nn::Mlp stage1_;
  nn::Mlp stage2_;
  nn::Mlp position_;
};

}  // namespace dapointr::backbone

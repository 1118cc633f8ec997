#include "dapointr/backbone.hpp"

#include "dapointr/errors.hpp"

#include <algorithm>

namespace dapointr::backbone {

using ad::Matrix;
using ad::Var;

Backbone::Backbone(nn::ParameterStore& store, const BackboneConfig& cfg, Rng& rng,
                   const std::string& prefix)
    : cfg_(cfg) {
  if (cfg.n_proxies == 0 || cfg.embed_dim == 0 || cfg.knn_k == 0 || cfg.hidden_dim == 0) {
    throw ConfigError("backbone sizes must be positive");
  }
  const auto h = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  stage1_ = nn::Mlp::create(store, prefix + ".edge1", {6, h, h}, rng);
  stage2_ = nn::Mlp::create(store, prefix + ".edge2", {2 * h, d, d}, rng);
  position_ = nn::Mlp::create(store, prefix + ".pos", {3, d, d}, rng);
}

TokenSequence Backbone::extract_proxies(ad::Tape& tape, const PointCloud& partial) const {
  const std::size_t n = cfg_.n_proxies;
  if (partial.size() < n) {
    throw InvalidInput("extract_proxies: cloud has " + std::to_string(partial.size()) +
                       " points, fewer than " + std::to_string(n) + " proxies");
  }
  if (cfg_.knn_k > partial.size()) throw InvalidInput("extract_proxies: knn_k exceeds cloud size");

  const auto center_idx = geometry::farthest_point_sample(partial, n, geometry::lexicographic_min_index(partial));
  const PointCloud centers = partial.subset(center_idx);
  const auto k = static_cast<Eigen::Index>(cfg_.knn_k);

  // stage 1: local geometry around each center
  const auto neigh = geometry::knn_indices(partial, centers, cfg_.knn_k);
  Matrix edges(static_cast<Eigen::Index>(n) * k, 6);
  for (std::size_t c = 0; c < n; ++c) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(c) * k + j;
      const auto ctr = centers.point(c);
      edges.row(r) << ctr, partial.point(neigh[c][static_cast<std::size_t>(j)]) - ctr;
    }
  }
  Var local = ad::group_max_rows(stage1_(tape, tape.constant(std::move(edges))), k);

  // stage 2: edge-conv over the proxy graph
  const std::size_t k2 = std::min(cfg_.knn_k, n);
  const auto graph = geometry::knn_indices(centers, centers, k2);
  std::vector<std::size_t> flat;
  flat.reserve(n * k2);
  for (const auto& row : graph) flat.insert(flat.end(), row.begin(), row.end());
  Var self = ad::repeat_rows(local, static_cast<Eigen::Index>(k2));
  Var other = ad::gather_rows(local, flat);
  Var pair = ad::concat_cols({self, ad::sub(other, self)});
  Var tokens = ad::group_max_rows(stage2_(tape, pair), static_cast<Eigen::Index>(k2));

  Var positions = position_(tape, tape.constant(Matrix(centers.points())));
  return TokenSequence{tokens, positions, centers.points()};
}

}  // namespace dapointr::backbone

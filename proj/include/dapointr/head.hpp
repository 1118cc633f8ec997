#pragma once

#include "dapointr/geometry.hpp"
#include "dapointr/nn.hpp"
#include "dapointr/seq2seq.hpp"

#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace dapointr::head {

using ad::Tape;
using ad::Var;

enum class RefinerKind { fold, spd };

std::string_view refiner_name(RefinerKind k);
RefinerKind parse_refiner(std::string_view name);

struct HeadConfig {
  RefinerKind refiner = RefinerKind::spd;
  std::size_t up_factor = 8;
  std::size_t hidden_dim = 64;
};

/// Per-layer predictions in slot correspondence: point j of every layer and
/// of the vote refers to the same dynamic query j.
struct PredictionSet {
  Var coarse;                  // N x 3
  std::vector<Var> per_layer;  // L entries, N x 3
  Var voted_mean;              // N x 3
  Var final_cloud;             // (N * up_factor) x 3

  PointCloud final_points() const { return PointCloud(Points(final_cloud.value())); }
};

/// Pred_l = coarse + offsets_l.
std::vector<Var> predictions_from_offsets(Var coarse, std::span<const Var> offsets);

/// Shared map from a decoded dynamic query to a 3D offset of its coarse point.
class LayerPredictor {
 public:
  LayerPredictor() = default;
  LayerPredictor(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
                 Eigen::Index hidden, Rng& rng);

  std::vector<Var> predict_per_layer(Tape& tape, const seq2seq::DecoderOutput& dec, Var coarse) const;
  const nn::Mlp& map() const noexcept { return map_; }

 private:
  nn::Mlp map_;
};

/// Upsamples N coarse points to N * up_factor points conditioned on the
/// final-layer dynamic query tokens.
class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual Var refine(Tape& tape, Var tokens, Var coarse) const = 0;
  virtual RefinerKind kind() const noexcept = 0;
  /// Final layer of the displacement map; zeroing it collapses the output onto the parents.
  virtual const nn::Linear& output_layer() const = 0;
  std::size_t up_factor() const noexcept { return up_; }

 protected:
  explicit Refiner(std::size_t up) : up_(up) {}
  std::size_t up_;
};

/// Folds a fixed 2D grid of up_factor samples around each coarse point.
class FoldRefiner final : public Refiner {
 public:
  FoldRefiner(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
              const HeadConfig& cfg, Rng& rng);
  Var refine(Tape& tape, Var tokens, Var coarse) const override;
  RefinerKind kind() const noexcept override { return RefinerKind::fold; }
  const nn::Linear& output_layer() const override { return fold_.last(); }

 private:
  ad::Matrix grid_;  // up x 2
  nn::Linear token_proj_;
  nn::Linear grid_proj_;
  nn::Mlp fold_;
};

/// Snowflake-style splitting: each parent emits up_factor child displacements
/// from (parent token, parent coordinate, pooled context).
class SpdRefiner final : public Refiner {
 public:
  SpdRefiner(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
             const HeadConfig& cfg, Rng& rng);
  Var refine(Tape& tape, Var tokens, Var coarse) const override;
  RefinerKind kind() const noexcept override { return RefinerKind::spd; }
  const nn::Linear& output_layer() const override { return split_; }

 private:
  nn::Mlp feature_;
  nn::Linear split_;
};

std::unique_ptr<Refiner> make_refiner(nn::ParameterStore& store, const std::string& name,
                                      Eigen::Index dim, const HeadConfig& cfg, Rng& rng);

/// CD(coarse, FPS(gt, N)) + CD(final, gt), raw units.
Var completion_loss(Tape& tape, const PredictionSet& pred, const PointCloud& gt);

}  // namespace dapointr::head

#include "dapointr/head.hpp"

#include "dapointr/errors.hpp"

#include <cmath>

namespace dapointr::head {

using ad::Matrix;

std::string_view refiner_name(RefinerKind k) { return k == RefinerKind::fold ? "fold" : "spd"; }

RefinerKind parse_refiner(std::string_view name) {
  if (name == "fold") return RefinerKind::fold;
  if (name == "spd") return RefinerKind::spd;
  throw ConfigError("unknown head '" + std::string(name) + "' (expected fold or spd)");
}

std::vector<Var> predictions_from_offsets(Var coarse, std::span<const Var> offsets) {
  std::vector<Var> out;
  out.reserve(offsets.size());
  for (const Var& o : offsets) out.push_back(ad::add(coarse, o));
  return out;
}

LayerPredictor::LayerPredictor(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
                               Eigen::Index hidden, Rng& rng)
    : map_(nn::Mlp::create(store, name, {dim, hidden, 3}, rng)) {}

std::vector<Var> LayerPredictor::predict_per_layer(Tape& tape, const seq2seq::DecoderOutput& dec,
                                                   Var coarse) const {
  std::vector<Var> offsets;
  offsets.reserve(dec.dynamic_out.size());
  for (const Var& layer : dec.dynamic_out) {
    if (layer.rows() != coarse.rows()) throw InvalidInput("predict_per_layer: query count != coarse count");
    offsets.push_back(map_(tape, layer));
  }
  return predictions_from_offsets(coarse, offsets);
}

FoldRefiner::FoldRefiner(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
                         const HeadConfig& cfg, Rng& rng)
    : Refiner(cfg.up_factor) {
  if (cfg.up_factor == 0) throw ConfigError("up_factor must be >= 1");
  const auto up = static_cast<Eigen::Index>(cfg.up_factor);
  const auto h = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto side = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(up))));
  grid_.resize(up, 2);
  constexpr double kGridExtent = 0.1;
  for (Eigen::Index i = 0; i < up; ++i) {
    const double u = side > 1 ? static_cast<double>(i % side) / static_cast<double>(side - 1) - 0.5 : 0.0;
    const double v = side > 1 ? static_cast<double>(i / side) / static_cast<double>(side - 1) - 0.5 : 0.0;
    grid_.row(i) << kGridExtent * u, kGridExtent * v;
  }
  token_proj_ = nn::Linear::create(store, name + ".token", dim + 3, h, rng);
  grid_proj_ = nn::Linear::create(store, name + ".grid", 2, h, rng);
  fold_ = nn::Mlp::create(store, name + ".fold", {h, h, 3}, rng);
}

Var FoldRefiner::refine(Tape& tape, Var tokens, Var coarse) const {
  const auto up = static_cast<Eigen::Index>(up_);
  const Eigen::Index n = coarse.rows();
  Var per_parent = token_proj_(tape, ad::concat_cols({tokens, coarse}));
  Var per_grid = grid_proj_(tape, tape.constant(grid_));
  Var h = ad::gelu(ad::add(ad::repeat_rows(per_parent, up), ad::tile_rows(per_grid, n)));
  return ad::add(ad::repeat_rows(coarse, up), fold_(tape, h));
}

SpdRefiner::SpdRefiner(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
                       const HeadConfig& cfg, Rng& rng)
    : Refiner(cfg.up_factor) {
  if (cfg.up_factor == 0) throw ConfigError("up_factor must be >= 1");
  const auto h = static_cast<Eigen::Index>(cfg.hidden_dim);
  feature_ = nn::Mlp::create(store, name + ".feature", {2 * dim + 3, h, h}, rng);
  split_ = nn::Linear::create(store, name + ".split", h, 3 * static_cast<Eigen::Index>(cfg.up_factor), rng);
}

Var SpdRefiner::refine(Tape& tape, Var tokens, Var coarse) const {
  const auto up = static_cast<Eigen::Index>(up_);
  const Eigen::Index n = coarse.rows();
  Var context = ad::tile_rows(ad::max_rows(tokens), n);
  Var f = ad::gelu(feature_(tape, ad::concat_cols({tokens, coarse, context})));
  Var disp = ad::reshape(split_(tape, f), n * up, 3);
  return ad::add(ad::repeat_rows(coarse, up), disp);
}

std::unique_ptr<Refiner> make_refiner(nn::ParameterStore& store, const std::string& name, Eigen::Index dim,
                                      const HeadConfig& cfg, Rng& rng) {
  if (cfg.refiner == RefinerKind::fold) return std::make_unique<FoldRefiner>(store, name, dim, cfg, rng);
  return std::make_unique<SpdRefiner>(store, name, dim, cfg, rng);
}

Var completion_loss(Tape& tape, const PredictionSet& pred, const PointCloud& gt) {
  if (gt.empty()) throw InvalidInput("completion_loss: empty ground truth");
  const auto n = static_cast<std::size_t>(pred.coarse.rows());
  const PointCloud gt_coarse =
      n <= gt.size() ? gt.subset(geometry::farthest_point_sample(gt, n, geometry::lexicographic_min_index(gt)))
                     : gt;
  Var coarse_term = ad::chamfer(pred.coarse, tape.constant(Matrix(gt_coarse.points())));
  Var dense_term = ad::chamfer(pred.final_cloud, tape.constant(Matrix(gt.points())));
  return ad::add(coarse_term, dense_term);
}

}  // namespace dapointr::head

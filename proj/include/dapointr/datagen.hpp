#pragma once

#include "dapointr/domain.hpp"
#include "dapointr/geometry.hpp"
#include "dapointr/random.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dapointr::datagen {

enum class Category { box, cylinder, lamp, table, chair };

inline constexpr std::array<Category, 5> kAllCategories{Category::box, Category::cylinder,
                                                        Category::lamp, Category::table,
                                                        Category::chair};

std::string_view category_name(Category c);
Category parse_category(std::string_view name);

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::RowVector3d translation = Eigen::RowVector3d::Zero();
};

/// Parametric shape. `params` layout per category:
///   box:      {size_x, size_y, size_z}
///   cylinder: {radius, height}
///   lamp:     {base_radius, pole_radius, pole_height, shade_bottom_radius,
///              shade_top_radius, shade_height}
///   table:    {top_x, top_y, top_thickness, height, leg_width}
///   chair:    {seat_x, seat_y, seat_thickness, seat_height, back_height, leg_width}
struct ShapeSpec {
  Category category = Category::box;
  std::vector<double> params;
  Pose pose;
};

/// Draws category parameters and a pose (yaw about z plus a small tilt).
ShapeSpec random_shape(Category category, Rng& rng);

/// n points uniformly distributed by surface area over the shape's primitives.
PointCloud generate_complete(const ShapeSpec& spec, std::size_t n, std::uint64_t seed);

/// Centers on the bounding-box center and scales so the farthest point has norm 1.
PointCloud normalize_to_unit_sphere(const PointCloud& cloud);

enum class OcclusionMode { half_space, view_cone, patch_drop };

std::string_view occlusion_name(OcclusionMode m);
OcclusionMode parse_occlusion(std::string_view name);

struct DomainConfig {
  OcclusionMode occlusion = OcclusionMode::half_space;
  double occlusion_fraction = 0.3;
  std::size_t resolution = 2048;
  double noise_sigma = 0.0;
  DomainLabel label = DomainLabel::source;
};

/// Benchmark-level validation: fraction in [0.05, 0.6], resolution >= 64, sigma >= 0.
void validate(const DomainConfig& cfg);

/// True when the configs differ in occlusion mode, resolution or noise level.
bool has_domain_gap(const DomainConfig& a, const DomainConfig& b);

/// Removes round(fraction * n) points by the configured mode, resamples to
/// cfg.resolution, then adds N(0, sigma^2) noise per coordinate. The view
/// direction is drawn uniformly on the sphere from `seed`.
PointCloud occlude(const PointCloud& complete, const DomainConfig& cfg, std::uint64_t seed);

/// As above with an explicit unit view direction.
PointCloud occlude(const PointCloud& complete, const DomainConfig& cfg,
                   const Eigen::RowVector3d& view_direction, std::uint64_t seed);

struct BenchmarkOptions {
  DomainConfig source{OcclusionMode::half_space, 0.4, 2048, 0.0, DomainLabel::source};
  DomainConfig target{OcclusionMode::view_cone, 0.4, 1024, 0.01, DomainLabel::target};
  std::size_t per_category = 10;
  std::size_t complete_points = 2048;
  std::uint64_t seed = 0;
};

struct BenchmarkSummary {
  std::size_t source_pairs = 0;
  std::size_t target_partials = 0;
  std::size_t eval_pairs = 0;
};

/// Writes
///   source/train/{partial,complete}/NNNN_cat.ply
///   target/train/partial/NNNN_cat.ply
///   target/eval/{partial,complete}/NNNN_cat.ply
///   manifest.json
BenchmarkSummary build_benchmark(const BenchmarkOptions& opts, const std::filesystem::path& out);

struct GeneratedSample {
  std::string id;  // "NNNN_cat"
  Category category = Category::box;
  PointCloud partial;
  PointCloud complete;
};

enum class Split { source_train, target_train, target_eval };
std::string_view split_dir(Split s);

/// Re-derives one sample from the manifest written by build_benchmark.
GeneratedSample regenerate_sample(const std::filesystem::path& manifest_path, Split split,
                                  std::size_t index);

}  // namespace dapointr::datagen

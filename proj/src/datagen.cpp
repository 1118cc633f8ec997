#include "dapointr/datagen.hpp"

#include "dapointr/cloud_io.hpp"
#include "dapointr/errors.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <variant>

namespace dapointr::datagen {
namespace fs = std::filesystem;
using json = nlohmann::json;
using Vec3 = Eigen::RowVector3d;

std::string_view category_name(Category c) {
  switch (c) {
    case Category::box: return "box";
    case Category::cylinder: return "cylinder";
    case Category::lamp: return "lamp";
    case Category::table: return "table";
    case Category::chair: return "chair";
  }
  return "?";
}

Category parse_category(std::string_view name) {
  for (auto c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  throw InvalidInput("unknown category '" + std::string(name) + "'");
}

std::string_view occlusion_name(OcclusionMode m) {
  switch (m) {
    case OcclusionMode::half_space: return "half-space";
    case OcclusionMode::view_cone: return "view-cone";
    case OcclusionMode::patch_drop: return "patch-drop";
  }
  return "?";
}

OcclusionMode parse_occlusion(std::string_view name) {
  for (auto m : {OcclusionMode::half_space, OcclusionMode::view_cone, OcclusionMode::patch_drop}) {
    if (occlusion_name(m) == name) return m;
  }
  throw ConfigError("unknown occlusion mode '" + std::string(name) +
                    "' (expected half-space, view-cone or patch-drop)");
}

namespace {

// Surface primitives in the shape's local frame (z up).
struct Rect {
  Vec3 origin, u, v;
  double area() const { return u.cross(v).norm(); }
};
struct Disk {
  double z, radius;
  double area() const { return std::numbers::pi * radius * radius; }
};
struct Frustum {  // lateral surface only; radius r0 at z0, r1 at z1
  double z0, z1, r0, r1;
  double area() const {
    const double slant = std::hypot(r1 - r0, z1 - z0);
    return std::numbers::pi * (r0 + r1) * slant;
  }
};
using Primitive = std::variant<Rect, Disk, Frustum>;

void add_box(std::vector<Primitive>& out, const Vec3& center, const Vec3& size) {
  const Vec3 h = size / 2.0;
  const Vec3 lo = center - h;
  const Vec3 ex(size[0], 0, 0), ey(0, size[1], 0), ez(0, 0, size[2]);
  out.push_back(Rect{lo, ex, ey});
  out.push_back(Rect{lo + ez, ex, ey});
  out.push_back(Rect{lo, ex, ez});
  out.push_back(Rect{lo + ey, ex, ez});
  out.push_back(Rect{lo, ey, ez});
  out.push_back(Rect{lo + ex, ey, ez});
}

void add_cylinder(std::vector<Primitive>& out, double radius, double z0, double z1, bool caps) {
  out.push_back(Frustum{z0, z1, radius, radius});
  if (caps) {
    out.push_back(Disk{z0, radius});
    out.push_back(Disk{z1, radius});
  }
}

void require_positive(const ShapeSpec& s, std::size_t count) {
  if (s.params.size() != count) {
    throw InvalidInput(std::string(category_name(s.category)) + " expects " +
                       std::to_string(count) + " parameters, got " +
                       std::to_string(s.params.size()));
  }
  for (double p : s.params) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw InvalidInput(std::string(category_name(s.category)) + ": dimensions must be positive");
    }
  }
}

std::vector<Primitive> build_primitives(const ShapeSpec& s) {
  std::vector<Primitive> prims;
  const auto& p = s.params;
  switch (s.category) {
    case Category::box:
      require_positive(s, 3);
      add_box(prims, Vec3::Zero(), Vec3(p[0], p[1], p[2]));
      break;
    case Category::cylinder:
      require_positive(s, 2);
      add_cylinder(prims, p[0], -p[1] / 2, p[1] / 2, true);
      break;
    case Category::lamp: {
      require_positive(s, 6);
      const double base_r = p[0], pole_r = p[1], pole_h = p[2];
      const double shade_r0 = p[3], shade_r1 = p[4], shade_h = p[5];
      prims.push_back(Disk{0.0, base_r});
      add_cylinder(prims, pole_r, 0.0, pole_h, false);
      prims.push_back(Frustum{pole_h - 0.3 * shade_h, pole_h + 0.7 * shade_h, shade_r0, shade_r1});
      break;
    }
    case Category::table: {
      require_positive(s, 5);
      const double tx = p[0], ty = p[1], tt = p[2], height = p[3], leg = p[4];
      if (2 * leg >= std::min(tx, ty) || tt >= height) throw InvalidInput("table: inconsistent dimensions");
      add_box(prims, Vec3(0, 0, height - tt / 2), Vec3(tx, ty, tt));
      const double lh = height - tt;
      for (int sx : {-1, 1}) {
        for (int sy : {-1, 1}) {
          add_box(prims, Vec3(sx * (tx / 2 - leg / 2), sy * (ty / 2 - leg / 2), lh / 2),
                  Vec3(leg, leg, lh));
        }
      }
      break;
    }
    case Category::chair: {
      require_positive(s, 6);
      const double sx_ = p[0], sy_ = p[1], st = p[2], sh = p[3], bh = p[4], leg = p[5];
      if (2 * leg >= std::min(sx_, sy_) || st >= sh) throw InvalidInput("chair: inconsistent dimensions");
      add_box(prims, Vec3(0, 0, sh - st / 2), Vec3(sx_, sy_, st));
      add_box(prims, Vec3(0, sy_ / 2 - st / 2, sh + bh / 2), Vec3(sx_, st, bh));
      const double lh = sh - st;
      for (int a : {-1, 1}) {
        for (int b : {-1, 1}) {
          add_box(prims, Vec3(a * (sx_ / 2 - leg / 2), b * (sy_ / 2 - leg / 2), lh / 2),
                  Vec3(leg, leg, lh));
        }
      }
      break;
    }
  }
  return prims;
}

Vec3 sample_on(const Primitive& prim, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  return std::visit(
      [&](const auto& p) -> Vec3 {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Rect>) {
          const double a = u01(rng), b = u01(rng);
          return p.origin + a * p.u + b * p.v;
        } else if constexpr (std::is_same_v<T, Disk>) {
          const double r = p.radius * std::sqrt(u01(rng));
          const double th = 2 * std::numbers::pi * u01(rng);
          return Vec3(r * std::cos(th), r * std::sin(th), p.z);
        } else {
          // area density along the axis is proportional to r(t) = r0 + (r1 - r0) t
          const double u = u01(rng);
          const double dr = p.r1 - p.r0;
          double t = u;
          if (std::abs(dr) > 1e-12) {
            const double target = u * (p.r0 + 0.5 * dr);
            t = (-p.r0 + std::sqrt(p.r0 * p.r0 + 2 * dr * target)) / dr;
          }
          const double r = p.r0 + dr * t;
          const double th = 2 * std::numbers::pi * u01(rng);
          return Vec3(r * std::cos(th), r * std::sin(th), p.z0 + (p.z1 - p.z0) * t);
        }
      },
      prim);
}

Eigen::Matrix3d rotation_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

}  // namespace

ShapeSpec random_shape(Category category, Rng& rng) {
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  ShapeSpec s;
  s.category = category;
  switch (category) {
    case Category::box: s.params = {U(0.5, 1.5), U(0.5, 1.5), U(0.5, 1.5)}; break;
    case Category::cylinder: s.params = {U(0.3, 0.7), U(0.6, 1.6)}; break;
    case Category::lamp:
      s.params = {U(0.2, 0.35), U(0.03, 0.06), U(0.8, 1.4), U(0.3, 0.5), U(0.12, 0.25), U(0.25, 0.45)};
      break;
    case Category::table:
      s.params = {U(0.8, 1.4), U(0.5, 1.0), U(0.04, 0.08), U(0.5, 0.9), U(0.04, 0.08)};
      break;
    case Category::chair:
      s.params = {U(0.4, 0.6), U(0.4, 0.6), U(0.04, 0.07), U(0.4, 0.5), U(0.4, 0.7), U(0.04, 0.06)};
      break;
  }
  s.pose.rotation = rotation_zyx(U(0, 2 * std::numbers::pi), U(-0.15, 0.15), U(-0.15, 0.15));
  s.pose.translation = Vec3(U(-0.2, 0.2), U(-0.2, 0.2), U(-0.2, 0.2));
  return s;
}

PointCloud generate_complete(const ShapeSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 64) throw InvalidInput("generate_complete: n must be >= 64");
  const auto prims = build_primitives(spec);
  std::vector<double> areas;
  for (const auto& p : prims) areas.push_back(std::visit([](const auto& q) { return q.area(); }, p));
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  Points pts(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 local = sample_on(prims[pick(rng)], rng);
    pts.row(static_cast<Eigen::Index>(i)) =
        (spec.pose.rotation * local.transpose()).transpose() + spec.pose.translation;
  }
  return PointCloud(std::move(pts));
}

PointCloud normalize_to_unit_sphere(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidInput("normalize_to_unit_sphere: empty point cloud");
  const Points& p = cloud.points();
  const Vec3 center = 0.5 * (p.colwise().minCoeff() + p.colwise().maxCoeff());
  Points c = p.rowwise() - center;
  const double r = c.rowwise().norm().maxCoeff();
  if (r > 0) c /= r;
  return PointCloud(std::move(c));
}

void validate(const DomainConfig& cfg) {
  if (!(cfg.occlusion_fraction >= 0.05 && cfg.occlusion_fraction <= 0.6)) {
    throw ConfigError("occlusion fraction must lie in [0.05, 0.6]");
  }
  if (cfg.resolution < 64) throw ConfigError("resolution must be >= 64");
  if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
    throw ConfigError("noise sigma must be finite and >= 0");
  }
}

bool has_domain_gap(const DomainConfig& a, const DomainConfig& b) {
  return a.occlusion != b.occlusion || a.resolution != b.resolution ||
         a.noise_sigma != b.noise_sigma;
}

PointCloud occlude(const PointCloud& complete, const DomainConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "view"));
  return occlude(complete, cfg, random_unit(rng), seed);
}

PointCloud occlude(const PointCloud& complete, const DomainConfig& cfg,
                   const Eigen::RowVector3d& view_direction, std::uint64_t seed) {
  const std::size_t n = complete.size();
  if (!(cfg.occlusion_fraction >= 0.0 && cfg.occlusion_fraction <= 0.6)) {
    throw InvalidInput("occlude: occlusion fraction must lie in [0, 0.6]");
  }
  if (cfg.resolution == 0) throw InvalidInput("occlude: resolution must be >= 1");
  const auto removed = static_cast<std::size_t>(std::lround(cfg.occlusion_fraction * static_cast<double>(n)));
  if (n < removed + 64) {
    throw InvalidInput("occlude: fraction " + std::to_string(cfg.occlusion_fraction) +
                       " leaves fewer than 64 of " + std::to_string(n) + " points");
  }
  const Vec3 dir = view_direction.normalized();
  const Points& p = complete.points();
  const Vec3 centroid = p.colwise().mean();

  std::vector<bool> drop(n, false);
  auto drop_top = [&](const std::vector<double>& score) {
    // removes the `removed` highest-scoring points, ties by lowest index kept
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t i = 0; i < removed; ++i) drop[order[i]] = true;
  };

  switch (cfg.occlusion) {
    case OcclusionMode::half_space: {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = (complete.point(i) - centroid).dot(dir);
      drop_top(s);
      break;
    }
    case OcclusionMode::view_cone: {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 d = complete.point(i) - centroid;
        const double len = d.norm();
        s[i] = len > 0 ? d.dot(dir) / len : 1.0;
      }
      drop_top(s);
      break;
    }
    case OcclusionMode::patch_drop: {
      constexpr std::size_t kPatches = 3;
      Rng rng(derive_seed(seed, "patch"));
      std::size_t left = removed;
      for (std::size_t patch = 0; patch < kPatches && left > 0; ++patch) {
        const std::size_t take = patch + 1 == kPatches ? left : removed / kPatches;
        std::vector<std::size_t> alive;
        for (std::size_t i = 0; i < n; ++i) {
          if (!drop[i]) alive.push_back(i);
        }
        const std::size_t center = alive[std::uniform_int_distribution<std::size_t>(0, alive.size() - 1)(rng)];
        std::vector<std::pair<double, std::size_t>> d;
        for (auto i : alive) d.emplace_back((complete.point(i) - complete.point(center)).squaredNorm(), i);
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
        for (std::size_t i = 0; i < take; ++i) drop[d[i].second] = true;
        left -= take;
      }
      break;
    }
  }

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (!drop[i]) keep.push_back(i);
  }
  PointCloud partial = geometry::resample(complete.subset(keep), cfg.resolution, derive_seed(seed, "resample"));
  if (cfg.noise_sigma > 0.0) {
    Rng rng(derive_seed(seed, "noise"));
    std::normal_distribution<double> g(0.0, cfg.noise_sigma);
    Points noisy = partial.points();
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += g(rng);
    partial = PointCloud(std::move(noisy));
  }
  return partial;
}

std::string_view split_dir(Split s) {
  switch (s) {
    case Split::source_train: return "source/train";
    case Split::target_train: return "target/train";
    case Split::target_eval: return "target/eval";
  }
  return "?";
}

namespace {

json to_json(const DomainConfig& c) {
  return {{"occlusion", occlusion_name(c.occlusion)},
          {"occlusion_fraction", c.occlusion_fraction},
          {"resolution", c.resolution},
          {"noise_sigma", c.noise_sigma},
          {"label", static_cast<int>(c.label)}};
}

DomainConfig domain_from_json(const json& j) {
  DomainConfig c;
  c.occlusion = parse_occlusion(j.at("occlusion").get<std::string>());
  c.occlusion_fraction = j.at("occlusion_fraction").get<double>();
  c.resolution = j.at("resolution").get<std::size_t>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.label = static_cast<DomainLabel>(j.at("label").get<int>());
  return c;
}

std::string sample_id(std::size_t index, Category c) {
  std::ostringstream ss;
  ss << std::setw(4) << std::setfill('0') << index << '_' << category_name(c);
  return ss.str();
}

GeneratedSample make_sample(std::uint64_t shape_seed, std::size_t index, Category cat,
                            const DomainConfig& domain, std::size_t complete_points) {
  Rng rng(derive_seed(shape_seed, "shape"));
  const ShapeSpec spec = random_shape(cat, rng);
  GeneratedSample s;
  s.id = sample_id(index, cat);
  s.category = cat;
  s.complete = normalize_to_unit_sphere(
      generate_complete(spec, complete_points, derive_seed(shape_seed, "surface")));
  s.partial = occlude(s.complete, domain, derive_seed(shape_seed, "occlude"));
  return s;
}

std::uint64_t sample_seed(std::uint64_t seed, Split split, std::size_t index) {
  return derive_seed(derive_seed(seed, split_dir(split)), index);
}

}  // namespace

BenchmarkSummary build_benchmark(const BenchmarkOptions& opts, const fs::path& out) {
  validate(opts.source);
  validate(opts.target);
  if (!has_domain_gap(opts.source, opts.target)) {
    throw ConfigError("source and target configs are identical in occlusion, resolution and noise");
  }
  if (opts.per_category == 0) throw ConfigError("per-category count must be >= 1");
  if (opts.complete_points < 64) throw ConfigError("complete point count must be >= 64");

  DomainConfig source = opts.source, target = opts.target;
  source.label = DomainLabel::source;
  target.label = DomainLabel::target;

  json manifest;
  manifest["version"] = 1;
  manifest["seed"] = opts.seed;
  manifest["per_category"] = opts.per_category;
  manifest["complete_points"] = opts.complete_points;
  manifest["source"] = to_json(source);
  manifest["target"] = to_json(target);
  json samples = json::object();

  BenchmarkSummary summary;
  for (Split split : {Split::source_train, Split::target_train, Split::target_eval}) {
    const DomainConfig& domain = split == Split::source_train ? source : target;
    const fs::path dir = out / split_dir(split);
    json entries = json::array();
    std::size_t index = 0;
    for (Category cat : kAllCategories) {
      for (std::size_t k = 0; k < opts.per_category; ++k, ++index) {
        const std::uint64_t seed = sample_seed(opts.seed, split, index);
        const auto s = make_sample(seed, index, cat, domain, opts.complete_points);
        io::write_cloud(s.partial, dir / "partial" / (s.id + ".ply"));
        if (split != Split::target_train) io::write_cloud(s.complete, dir / "complete" / (s.id + ".ply"));
        entries.push_back({{"id", s.id}, {"category", category_name(cat)}, {"seed", seed}});
      }
    }
    samples[std::string(split_dir(split))] = std::move(entries);
    if (split == Split::source_train) summary.source_pairs = index;
    if (split == Split::target_train) summary.target_partials = index;
    if (split == Split::target_eval) summary.eval_pairs = index;
  }
  manifest["samples"] = std::move(samples);
  std::ofstream mf(out / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw InvalidInput("cannot write manifest in '" + out.string() + "'");
  return summary;
}

GeneratedSample regenerate_sample(const fs::path& manifest_path, Split split, std::size_t index) {
  std::ifstream in(manifest_path);
  if (!in) throw InvalidInput("cannot open manifest '" + manifest_path.string() + "'");
  const json m = json::parse(in);
  const auto& entries = m.at("samples").at(std::string(split_dir(split)));
  if (index >= entries.size()) throw InvalidInput("manifest sample index out of range");
  const auto& e = entries.at(index);
  const DomainConfig domain = domain_from_json(split == Split::source_train ? m.at("source") : m.at("target"));
  return make_sample(e.at("seed").get<std::uint64_t>(), index,
                     parse_category(e.at("category").get<std::string>()), domain,
                     m.at("complete_points").get<std::size_t>());
}

}  // namespace dapointr::datagen

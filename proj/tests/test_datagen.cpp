#include "dapointr/cloud_io.hpp"
#include "dapointr/datagen.hpp"
#include "dapointr/errors.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace dapointr;
using namespace dapointr::datagen;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dapointr_datagen_test" / name;
  fs::remove_all(dir);
  return dir;
}

BenchmarkOptions small_options() {
  BenchmarkOptions o;
  o.per_category = 2;
  o.complete_points = 256;
  o.source.resolution = 128;
  o.target.resolution = 96;
  o.seed = 17;
  return o;
}

}  // namespace

TEST(GenerateComplete, UnitBoxPointsLieOnSurface) {
  const ShapeSpec box{Category::box, {1.0, 1.0, 1.0}, {}};
  const auto c = generate_complete(box, 2048, 1);
  ASSERT_EQ(c.size(), 2048u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double m = c.point(i).cwiseAbs().maxCoeff();
    EXPECT_NEAR(m, 0.5, 1e-12);
  }
}

TEST(GenerateComplete, CylinderInsideRadius) {
  const ShapeSpec cyl{Category::cylinder, {1.0, 2.0}, {}};
  const auto c = generate_complete(cyl, 1024, 2);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto p = c.point(i);
    EXPECT_LE(p.x() * p.x() + p.y() * p.y(), 1.0 + 1e-9);
    EXPECT_LE(std::abs(p.z()), 1.0 + 1e-12);
  }
}

TEST(GenerateComplete, DeterministicAndValidated) {
  Rng rng(3);
  for (auto cat : kAllCategories) {
    const auto spec = random_shape(cat, rng);
    EXPECT_EQ(generate_complete(spec, 300, 9), generate_complete(spec, 300, 9)) << category_name(cat);
    EXPECT_NE(generate_complete(spec, 300, 9), generate_complete(spec, 300, 10));
  }
  EXPECT_THROW(generate_complete({Category::box, {1.0, -1.0, 1.0}, {}}, 100, 0), InvalidInput);
  EXPECT_THROW(generate_complete({Category::box, {1.0, 1.0}, {}}, 100, 0), InvalidInput);
  EXPECT_THROW(generate_complete({Category::box, {1.0, 1.0, 1.0}, {}}, 63, 0), InvalidInput);
}

TEST(Normalize, FitsUnitSphere) {
  Rng rng(4);
  const auto c = normalize_to_unit_sphere(generate_complete(random_shape(Category::chair, rng), 500, 1));
  EXPECT_NEAR(c.points().rowwise().norm().maxCoeff(), 1.0, 1e-12);
}

TEST(Occlude, ZeroFractionKeepsCloud) {
  const ShapeSpec box{Category::box, {1.0, 2.0, 0.5}, {}};
  const auto c = generate_complete(box, 512, 5);
  const DomainConfig cfg{OcclusionMode::half_space, 0.0, 512, 0.0, DomainLabel::source};
  EXPECT_EQ(geometry::chamfer_distance(occlude(c, cfg, 1), c).raw, 0.0);
}

TEST(Occlude, HalfSpaceOnSymmetricBox) {
  // mirror every point through x = 0 so the cloud is exactly symmetric
  const auto half = generate_complete({Category::box, {1.0, 1.0, 1.0}, {}}, 256, 6);
  Points p(512, 3);
  p.topRows(256) = half.points();
  p.bottomRows(256) = half.points();
  p.bottomRows(256).col(0) *= -1.0;
  const PointCloud sym(p);
  const DomainConfig cfg{OcclusionMode::half_space, 0.5, 200, 0.0, DomainLabel::source};
  const auto out = occlude(sym, cfg, Eigen::RowVector3d(1, 0, 0), 3);
  ASSERT_EQ(out.size(), 200u);
  EXPECT_LE(out.points().col(0).maxCoeff(), 0.0);
}

TEST(Occlude, NoiseFreePartialIsSubset) {
  Rng rng(7);
  for (auto mode : {OcclusionMode::half_space, OcclusionMode::view_cone, OcclusionMode::patch_drop}) {
    for (auto cat : kAllCategories) {
      const auto c = normalize_to_unit_sphere(generate_complete(random_shape(cat, rng), 1024, 2));
      const DomainConfig cfg{mode, 0.4, 300, 0.0, DomainLabel::target};
      const auto partial = occlude(c, cfg, 11);
      EXPECT_EQ(partial.size(), 300u);
      EXPECT_EQ(geometry::unidirectional_chamfer(partial, c).raw, 0.0) << occlusion_name(mode);
    }
  }
}

TEST(Occlude, FractionTooLarge) {
  const auto c = generate_complete({Category::box, {1.0, 1.0, 1.0}, {}}, 200, 1);
  EXPECT_THROW(occlude(c, {OcclusionMode::view_cone, 0.7, 100, 0.0, DomainLabel::source}, 1), InvalidInput);
  // 0.8 of 200 removed leaves fewer than 64 points
  EXPECT_THROW(occlude(c, {OcclusionMode::view_cone, 0.8, 100, 0.0, DomainLabel::source}, 1), InvalidInput);
}

TEST(DomainConfig, Validation) {
  EXPECT_THROW(validate({OcclusionMode::half_space, 0.01, 256, 0.0, DomainLabel::source}), ConfigError);
  EXPECT_THROW(validate({OcclusionMode::half_space, 0.3, 32, 0.0, DomainLabel::source}), ConfigError);
  EXPECT_THROW(validate({OcclusionMode::half_space, 0.3, 256, -1.0, DomainLabel::source}), ConfigError);
  EXPECT_THROW(parse_occlusion("sideways"), std::exception);
  EXPECT_EQ(parse_occlusion("view-cone"), OcclusionMode::view_cone);
}

TEST(Benchmark, CountsLayoutAndBalance) {
  BenchmarkOptions o = small_options();
  o.per_category = 10;
  const auto dir = fresh_dir("counts");
  const auto s = build_benchmark(o, dir);
  EXPECT_EQ(s.source_pairs, 50u);
  EXPECT_EQ(s.target_partials, 50u);
  EXPECT_EQ(s.eval_pairs, 50u);
  auto count = [](const fs::path& d) {
    return static_cast<std::size_t>(std::distance(fs::directory_iterator(d), fs::directory_iterator{}));
  };
  EXPECT_EQ(count(dir / "source/train/partial"), 50u);
  EXPECT_EQ(count(dir / "source/train/complete"), 50u);
  EXPECT_EQ(count(dir / "target/train/partial"), 50u);
  EXPECT_FALSE(fs::exists(dir / "target/train/complete"));
  EXPECT_EQ(count(dir / "target/eval/partial"), 50u);
  EXPECT_EQ(count(dir / "target/eval/complete"), 50u);

  std::map<std::string, int> per_cat;
  for (const auto& e : fs::directory_iterator(dir / "target/train/partial")) {
    const auto stem = e.path().stem().string();
    ++per_cat[stem.substr(stem.find('_') + 1)];
    EXPECT_EQ(io::read_cloud(e.path()).size(), o.target.resolution);
  }
  ASSERT_EQ(per_cat.size(), 5u);
  for (const auto& [cat, n] : per_cat) EXPECT_EQ(n, 10) << cat;
}

TEST(Benchmark, ManifestReproducesBytes) {
  const auto dir = fresh_dir("manifest");
  build_benchmark(small_options(), dir);
  const auto manifest = nlohmann::json::parse(file_bytes(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), 17u);
  for (Split split : {Split::source_train, Split::target_train, Split::target_eval}) {
    const auto& entries = manifest.at("samples").at(std::string(split_dir(split)));
    ASSERT_EQ(entries.size(), 10u);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto s = regenerate_sample(dir / "manifest.json", split, i);
      const auto id = entries[i].at("id").get<std::string>();
      EXPECT_EQ(s.id, id);
      EXPECT_EQ(io::serialize_ply(s.partial), file_bytes(dir / split_dir(split) / "partial" / (id + ".ply")));
      if (split != Split::target_train) {
        EXPECT_EQ(io::serialize_ply(s.complete), file_bytes(dir / split_dir(split) / "complete" / (id + ".ply")));
      }
    }
  }
  // a second build with the same seed writes identical files
  const auto again = fresh_dir("manifest_again");
  build_benchmark(small_options(), again);
  EXPECT_EQ(file_bytes(dir / "target/eval/partial/0003_cylinder.ply"),
            file_bytes(again / "target/eval/partial/0003_cylinder.ply"));
}

TEST(Benchmark, IdenticalDomainsRejected) {
  BenchmarkOptions o = small_options();
  o.target = o.source;
  o.target.label = DomainLabel::target;
  EXPECT_THROW(build_benchmark(o, fresh_dir("identical")), ConfigError);
}

TEST(Benchmark, DomainsMeasurablyDiffer) {
  BenchmarkOptions o = small_options();
  o.target.noise_sigma = 0.02;
  const auto dir = fresh_dir("gap");
  build_benchmark(o, dir);
  // source is noise-free (UCD to its complete is exactly 0); target noise gives about 3 sigma^2
  double src = 0.0, tgt = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto s = regenerate_sample(dir / "manifest.json", Split::source_train, i);
    const auto t = regenerate_sample(dir / "manifest.json", Split::target_eval, i);
    EXPECT_EQ(s.partial.size(), 128u);
    EXPECT_EQ(t.partial.size(), 96u);
    src += geometry::unidirectional_chamfer(s.partial, s.complete).raw / 10;
    tgt += geometry::unidirectional_chamfer(t.partial, t.complete).raw / 10;
  }
  EXPECT_EQ(src, 0.0);
  EXPECT_GT(tgt, 0.5 * 3 * 0.02 * 0.02);
  EXPECT_LT(tgt, 1.5 * 3 * 0.02 * 0.02);
}

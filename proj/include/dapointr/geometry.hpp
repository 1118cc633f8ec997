#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace dapointr {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Point3 = Eigen::RowVector3d;

/// Ordered list of 3D points. Coordinates must be finite; emptiness is
/// representable so that metric preconditions can be reported as errors.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(Points points);
  PointCloud(std::initializer_list<std::array<double, 3>> points);

  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  bool empty() const noexcept { return points_.rows() == 0; }
  const Points& points() const noexcept { return points_; }
  Point3 point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)); }

  PointCloud subset(std::span<const std::size_t> indices) const;
  PointCloud translated(const Point3& offset) const;

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.points_.rows() == b.points_.rows() && a.points_ == b.points_;
  }

 private:
  Points points_;
};

namespace geometry {

inline constexpr double kChamferScale = 1e4;
inline constexpr double kHausdorffScale = 1e2;

/// A metric in raw units plus its reporting-scaled value.
/// CD and UCD are reported x1e4, UHD x1e2.
struct MetricValue {
  double raw = 0.0;
  double scaled = 0.0;
};

/// Squared distance from every point of `from` to its nearest point in `to`.
std::vector<double> nearest_squared_distances(const Points& from, const Points& to);

/// Like nearest_squared_distances but also reports the argmin (lowest index on ties).
void nearest_neighbors(const Points& from, const Points& to, std::vector<double>& sq_dist,
                       std::vector<std::size_t>& index);

/// Symmetric chamfer distance: squared L2 nearest-neighbour distances, averaged
/// per point in each direction, the two directions summed.
MetricValue chamfer_distance(const PointCloud& a, const PointCloud& b);

/// Mean squared nearest-neighbour distance from `partial` to `pred` only.
MetricValue unidirectional_chamfer(const PointCloud& partial, const PointCloud& pred);

/// Max over `partial` of the (non-squared) nearest-neighbour distance to `pred`.
MetricValue unidirectional_hausdorff(const PointCloud& partial, const PointCloud& pred);

/// Greedy max-min subset of k distinct indices starting at `seed_index`.
/// Ties are broken by lowest index.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k,
                                               std::size_t seed_index);

/// Index of the lexicographically smallest (x, then y, then z) point; a
/// permutation-invariant FPS seed.
std::size_t lexicographic_min_index(const PointCloud& cloud);

/// For each query point, the k nearest indices into `cloud` in ascending
/// distance, ties by lowest index.
std::vector<std::vector<std::size_t>> knn_indices(const PointCloud& cloud, const PointCloud& query,
                                                  std::size_t k);
std::vector<std::vector<std::size_t>> knn_indices(const Points& cloud, const Points& query,
                                                  std::size_t k);

/// Exactly n points: an FPS subsample (seeded at the lexicographic minimum)
/// when the cloud has at least n points, otherwise the original points plus
/// a uniform with-replacement draw for the deficit.
PointCloud resample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

}  // namespace geometry
}  // namespace dapointr

#include "dapointr/geometry.hpp"

#include "dapointr/errors.hpp"
#include "dapointr/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>
#include <string>

namespace dapointr {

PointCloud::PointCloud(Points points) : points_(std::move(points)) {
  if (!points_.allFinite()) {
    throw InvalidInput("point cloud contains non-finite coordinates");
  }
}

PointCloud::PointCloud(std::initializer_list<std::array<double, 3>> points) {
  points_.resize(static_cast<Eigen::Index>(points.size()), 3);
  Eigen::Index r = 0;
  for (const auto& p : points) {
    points_.row(r++) << p[0], p[1], p[2];
  }
  if (!points_.allFinite()) {
    throw InvalidInput("point cloud contains non-finite coordinates");
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  Points out(static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InvalidInput("subset index out of range");
    out.row(static_cast<Eigen::Index>(i)) = points_.row(static_cast<Eigen::Index>(indices[i]));
  }
  return PointCloud(std::move(out));
}

PointCloud PointCloud::translated(const Point3& offset) const {
  Points out = points_.rowwise() + offset;
  return PointCloud(std::move(out));
}

namespace geometry {
namespace {

void require_nonempty(const PointCloud& c, const char* what) {
  if (c.empty()) throw InvalidInput(std::string(what) + ": empty point cloud");
}

inline double sq_dist(const Points& a, Eigen::Index i, const Points& b, Eigen::Index j) {
  const double dx = a(i, 0) - b(j, 0);
  const double dy = a(i, 1) - b(j, 1);
  const double dz = a(i, 2) - b(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

void nearest_neighbors(const Points& from, const Points& to, std::vector<double>& sq_dist_out,
                       std::vector<std::size_t>& index) {
  const Eigen::Index n = from.rows();
  const Eigen::Index m = to.rows();
  sq_dist_out.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  index.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = sq_dist(from, i, to, j);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    sq_dist_out[static_cast<std::size_t>(i)] = best;
    index[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best_j);
  }
}

std::vector<double> nearest_squared_distances(const Points& from, const Points& to) {
  std::vector<double> d;
  std::vector<std::size_t> idx;
  nearest_neighbors(from, to, d, idx);
  return d;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MetricValue chamfer_distance(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, "chamfer_distance");
  require_nonempty(b, "chamfer_distance");
  const double raw = mean_of(nearest_squared_distances(a.points(), b.points())) +
                     mean_of(nearest_squared_distances(b.points(), a.points()));
  return {raw, raw * kChamferScale};
}

MetricValue unidirectional_chamfer(const PointCloud& partial, const PointCloud& pred) {
  require_nonempty(partial, "unidirectional_chamfer");
  require_nonempty(pred, "unidirectional_chamfer");
  const double raw = mean_of(nearest_squared_distances(partial.points(), pred.points()));
  return {raw, raw * kChamferScale};
}

MetricValue unidirectional_hausdorff(const PointCloud& partial, const PointCloud& pred) {
  require_nonempty(partial, "unidirectional_hausdorff");
  require_nonempty(pred, "unidirectional_hausdorff");
  const auto d = nearest_squared_distances(partial.points(), pred.points());
  const double raw = std::sqrt(*std::max_element(d.begin(), d.end()));
  return {raw, raw * kHausdorffScale};
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k,
                                               std::size_t seed_index) {
  const std::size_t n = cloud.size();
  if (k == 0) throw InvalidInput("farthest_point_sample: k must be >= 1");
  if (k > n) {
    throw InvalidInput("farthest_point_sample: k=" + std::to_string(k) +
                       " exceeds cloud size " + std::to_string(n));
  }
  if (seed_index >= n) throw InvalidInput("farthest_point_sample: seed index out of range");

  const Points& p = cloud.points();
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> out;
  out.reserve(k);
  std::size_t current = seed_index;
  for (std::size_t s = 0; s < k; ++s) {
    out.push_back(current);
    taken[current] = true;
    if (s + 1 == k) break;
    std::size_t next = n;
    double best = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = sq_dist(p, static_cast<Eigen::Index>(j), p,
                               static_cast<Eigen::Index>(current));
      if (d < min_d[j]) min_d[j] = d;
      // strict '>' keeps the lowest index among equal candidates
      if (!taken[j] && min_d[j] > best) {
        best = min_d[j];
        next = j;
      }
    }
    current = next;
  }
  return out;
}

std::size_t lexicographic_min_index(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidInput("lexicographic_min_index: empty point cloud");
  const Points& p = cloud.points();
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < p.rows(); ++i) {
    const auto b = static_cast<Eigen::Index>(best);
    if (std::tie(p(i, 0), p(i, 1), p(i, 2)) < std::tie(p(b, 0), p(b, 1), p(b, 2))) {
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

std::vector<std::vector<std::size_t>> knn_indices(const Points& cloud, const Points& query,
                                                  std::size_t k) {
  const auto n = static_cast<std::size_t>(cloud.rows());
  if (k == 0 || k > n) {
    throw InvalidInput("knn_indices: k=" + std::to_string(k) + " invalid for cloud size " +
                       std::to_string(n));
  }
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(query.rows()));
  std::vector<std::pair<double, std::size_t>> cand(n);
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    for (std::size_t j = 0; j < n; ++j) {
      cand[j] = {sq_dist(query, q, cloud, static_cast<Eigen::Index>(j)), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    auto& row = out[static_cast<std::size_t>(q)];
    row.resize(k);
    for (std::size_t i = 0; i < k; ++i) row[i] = cand[i].second;
  }
  return out;
}

std::vector<std::vector<std::size_t>> knn_indices(const PointCloud& cloud, const PointCloud& query,
                                                  std::size_t k) {
  return knn_indices(cloud.points(), query.points(), k);
}

PointCloud resample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("resample: n must be >= 1");
  if (cloud.empty()) throw InvalidInput("resample: empty point cloud");
  if (cloud.size() >= n) {
    return cloud.subset(farthest_point_sample(cloud, n, lexicographic_min_index(cloud)));
  }
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  while (idx.size() < n) idx.push_back(pick(rng));
  return cloud.subset(idx);
}

}  // namespace geometry
}  // namespace dapointr

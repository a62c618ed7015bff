#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"

namespace cdcl {

/// A scalar image (one value per pixel, row-major).
struct ScalarImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
};

/// Projection of the mean-centered spectra onto the leading eigenvector of
/// the band covariance, min-max rescaled to [0, 1]. The eigenvector sign is
/// fixed so that its largest-magnitude entry is positive.
inline ScalarImage first_principal_component(const HsiCube& cube) {
  const std::size_t n = cube.pixels();
  const auto bands = static_cast<Eigen::Index>(cube.bands());
  constexpr std::size_t chunk = 4096;

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(bands);
  for (std::size_t first = 0; first < n; first += chunk) {
    const auto count = std::min(chunk, n - first);
    mean += cube.gather_range(first, count).colwise().sum().transpose();
  }
  mean /= static_cast<double>(n);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(bands, bands);
  for (std::size_t first = 0; first < n; first += chunk) {
    const auto count = std::min(chunk, n - first);
    Eigen::MatrixXd X = cube.gather_range(first, count);
    X.rowwise() -= mean.transpose();
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  }
  scatter = scatter.selfadjointView<Eigen::Lower>();
  if (!(scatter.trace() > 0.0)) throw DataError("degenerate input: cube has zero spectral variance");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
  if (eig.info() != Eigen::Success) throw NumericalError("band covariance eigendecomposition failed");
  Eigen::VectorXd axis = eig.eigenvectors().col(bands - 1);
  Eigen::Index imax = 0;
  axis.cwiseAbs().maxCoeff(&imax);
  if (axis[imax] < 0) axis = -axis;

  ScalarImage pc{cube.width(), cube.height(), std::vector<double>(n)};
  for (std::size_t first = 0; first < n; first += chunk) {
    const auto count = std::min(chunk, n - first);
    Eigen::MatrixXd X = cube.gather_range(first, count);
    X.rowwise() -= mean.transpose();
    Eigen::VectorXd proj = X * axis;
    std::copy(proj.data(), proj.data() + count, pc.values.begin() + static_cast<std::ptrdiff_t>(first));
  }
  const auto [lo, hi] = std::minmax_element(pc.values.begin(), pc.values.end());
  const double low = *lo;
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw DataError("degenerate input: principal component is constant");
  for (auto& v : pc.values) v = (v - low) / range;
  return pc;
}

struct KMeansOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-6;
};

struct KMeansResult {
  std::vector<int> assignment;        // cluster per point
  Eigen::MatrixXd centers;            // one column per cluster
  std::vector<double> objective_trace;  // within-cluster SS after each assignment step
  int iterations = 0;

  double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

namespace detail {

// Squared distances from every column of `points` to `center`.
inline Eigen::VectorXd squared_distances(const Eigen::MatrixXd& points, const Eigen::VectorXd& center) {
  return (points.colwise() - center).colwise().squaredNorm().transpose();
}

inline std::vector<Eigen::Index> kmeanspp_seeds(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.cols();
  std::vector<Eigen::Index> seeds;
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  seeds.push_back(first(rng));
  chosen[static_cast<std::size_t>(seeds.back())] = true;

  Eigen::VectorXd d2 = squared_distances(points, points.col(seeds.back()));
  while (static_cast<int>(seeds.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (d2[i] > 0.0) { pick = i; break; }
      }
    } else {
      // All remaining points coincide with a center: take any unchosen one.
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
      std::uniform_int_distribution<std::size_t> pickd(0, free.size() - 1);
      pick = free[pickd(rng)];
    }
    seeds.push_back(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    d2 = d2.cwiseMin(squared_distances(points, points.col(pick)));
  }
  return seeds;
}

}  // namespace detail

/// Lloyd's k-means on the columns of `points` with k-means++ seeding.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                           const KMeansOptions& opts = {}) {
  const Eigen::Index n = points.cols();
  if (k < 1) throw InvalidArgument("k-means needs k >= 1");
  if (k > n) throw InvalidArgument("k-means k=" + std::to_string(k) + " exceeds point count " + std::to_string(n));

  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centers.resize(points.rows(), k);
  const auto seeds = detail::kmeanspp_seeds(points, k, rng);
  for (int c = 0; c < k; ++c) res.centers.col(c) = points.col(seeds[static_cast<std::size_t>(c)]);
  res.assignment.assign(static_cast<std::size_t>(n), -1);

  Eigen::MatrixXd dist(n, k);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    for (int c = 0; c < k; ++c) dist.col(c) = detail::squared_distances(points, res.centers.col(c));

    bool changed = false;
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      dist.row(i).minCoeff(&best);
      if (res.assignment[static_cast<std::size_t>(i)] != best) changed = true;
      res.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
      ++counts[static_cast<std::size_t>(best)];
    }
    // Empty cluster: steal the point farthest from its own center.
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto a = res.assignment[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        if (dist(i, a) > far_d) { far_d = dist(i, a); far = i; }
      }
      if (far < 0) break;
      --counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
      res.assignment[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      res.centers.col(c) = points.col(far);
      dist(far, c) = 0.0;
      changed = true;
    }

    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) objective += dist(i, res.assignment[static_cast<std::size_t>(i)]);
    res.objective_trace.push_back(objective);
    res.iterations = iter + 1;

    res.centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) res.centers.col(res.assignment[static_cast<std::size_t>(i)]) += points.col(i);
    for (int c = 0; c < k; ++c) res.centers.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    if (!changed) break;
    const auto m = res.objective_trace.size();
    if (m >= 2) {
      const double prev = res.objective_trace[m - 2];
      if (prev - objective <= opts.relative_tolerance * std::max(prev, std::numeric_limits<double>::min()))
        break;
    }
  }
  return res;
}

/// Groups the bands (as vectors over pixels) into `k` clusters and returns
/// a cube whose band j is the mean of cluster j. Clusters are ordered by
/// their lowest member band index.
inline HsiCube kmeans_band_reduce(const HsiCube& cube, int k, std::uint64_t seed,
                                  const KMeansOptions& opts = {}) {
  if (k < 1 || static_cast<std::size_t>(k) > cube.bands())
    throw InvalidArgument("band reduction needs 1 <= k <= bands (k=" + std::to_string(k) +
                          ", bands=" + std::to_string(cube.bands()) + ")");
  const auto n = cube.pixels();
  Eigen::MatrixXd points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cube.bands()));
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const auto band = cube.band(b);
    for (std::size_t p = 0; p < n; ++p) points(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(b)) = band[p];
  }
  const auto res = kmeans(points, k, seed, opts);

  std::vector<int> first_member(static_cast<std::size_t>(k), std::numeric_limits<int>::max());
  for (std::size_t b = 0; b < res.assignment.size(); ++b) {
    auto& f = first_member[static_cast<std::size_t>(res.assignment[b])];
    f = std::min(f, static_cast<int>(b));
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return first_member[static_cast<std::size_t>(a)] < first_member[static_cast<std::size_t>(b)];
  });

  std::vector<float> values(n * static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const int cluster = order[static_cast<std::size_t>(j)];
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    int members = 0;
    for (std::size_t b = 0; b < res.assignment.size(); ++b) {
      if (res.assignment[b] != cluster) continue;
      acc += points.col(static_cast<Eigen::Index>(b));
      ++members;
    }
    acc /= members;
    for (std::size_t p = 0; p < n; ++p) values[static_cast<std::size_t>(j) * n + p] = static_cast<float>(acc[static_cast<Eigen::Index>(p)]);
  }
  return HsiCube(cube.width(), cube.height(), static_cast<std::size_t>(k), std::move(values));
}

}  // namespace cdcl

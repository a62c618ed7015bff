#pragma once

// Desk-scale heterogeneous two-domain dataset.
//
// Both images are Voronoi partitions of the lattice; site k carries class
// (k mod C) + 1, so every class owns at least one cell. Target spectra follow
// per-class Gaussians in d_t dimensions, split into a per-cell offset
// (covariance F_c F_c^T, shared by all pixels of the cell) and per-pixel
// noise, so each class is Gaussian while cells stay spatially coherent. Source spectra are independent per-pixel draws from the same
// class Gaussians mapped to d_s dimensions by a fixed mixing matrix, plus
// isotropic noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"

namespace cdcl {

enum class Mixing { Random, IdentityPadded };

struct SyntheticSpec {
  int classes = 5;
  std::size_t width = 64;
  std::size_t height = 64;
  int sites = 20;  // Voronoi cells per image
  std::size_t source_bands = 12;
  std::size_t target_bands = 20;
  double class_separation = 1.0;  // scale of the random class-mean offsets
  double brightness_contrast = 4.0;  // spread of the per-class brightness levels
  double class_spread = 0.2;      // per-cell within-class deviation scale
  double pixel_noise = 1.4;       // per-pixel deviation inside a cell
  double source_noise = 0.05;
  Mixing mixing = Mixing::Random;
  std::uint64_t layout_seed = 0;

  void validate() const {
    if (classes < 1 || classes > 65535) throw InvalidArgument("synthetic class count out of range");
    if (width * height == 0) throw InvalidArgument("synthetic image must have pixels");
    if (sites < classes) throw InvalidArgument("need at least one Voronoi site per class");
    if (static_cast<std::size_t>(sites) > width * height) throw InvalidArgument("more sites than pixels");
    if (source_bands == 0 || target_bands == 0) throw InvalidArgument("band counts must be positive");
    if (source_bands == target_bands) throw InvalidArgument("source and target dimensions must differ");
    if (mixing == Mixing::IdentityPadded && source_bands != target_bands + 1)
      throw InvalidArgument("identity-padded mixing needs source_bands = target_bands + 1");
    if (!(brightness_contrast >= 0.0) || !(class_spread >= 0.0) || !(pixel_noise >= 0.0) || !(source_noise >= 0.0) || !(class_separation >= 0.0))
      throw InvalidArgument("synthetic scales must be >= 0");
  }
};

struct SyntheticDomain {
  HsiCube cube;
  LabelMap labels;
};

struct SyntheticDataset {
  SyntheticDomain source;
  SyntheticDomain target;
  std::vector<Eigen::VectorXd> class_means;      // target space
  std::vector<Eigen::MatrixXd> class_factors;    // covariance = F F^T
  Eigen::MatrixXd mixing;                        // d_s x d_t
};

namespace detail {

// Returns the class map and the Voronoi cell of every pixel.
inline std::pair<LabelMap, std::vector<std::size_t>> voronoi_layout(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, spec.width * spec.height - 1);
  std::set<std::size_t> chosen;
  std::vector<std::pair<double, double>> sites;  // (row, col)
  while (static_cast<int>(sites.size()) < spec.sites) {
    const auto p = pick(rng);
    if (!chosen.insert(p).second) continue;
    sites.emplace_back(static_cast<double>(p / spec.width), static_cast<double>(p % spec.width));
  }
  LabelMap labels(spec.width, spec.height);
  std::vector<std::size_t> cell(spec.width * spec.height, 0);
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < sites.size(); ++k) {
        const double dr = static_cast<double>(r) - sites[k].first;
        const double dc = static_cast<double>(c) - sites[k].second;
        const double d = dr * dr + dc * dc;
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      const auto p = pixel_index(r, c, spec.width);
      labels.set(p, static_cast<ClassLabel>(best % static_cast<std::size_t>(spec.classes)) + 1);
      cell[p] = best;
    }
  }
  return {std::move(labels), std::move(cell)};
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = n01(rng);
  return M;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  std::mt19937_64 rng(rng_seed * 0x9E3779B97F4A7C15ULL + spec.layout_seed);
  const auto dt = static_cast<Eigen::Index>(spec.target_bands);
  const auto ds = static_cast<Eigen::Index>(spec.source_bands);
  const auto C = static_cast<std::size_t>(spec.classes);

  SyntheticDataset out;
  // Classes sit at evenly spaced, shuffled brightness levels along a common
  // axis. Everything else (random mean offsets, cell offsets, pixel noise)
  // lives in the complement of that axis, so brightness separates the
  // classes spatially while the rest of the spectrum carries the confusion.
  const Eigen::VectorXd base = Eigen::VectorXd::Constant(dt, 1.0);
  const Eigen::VectorXd axis = base.normalized();
  auto off_axis = [&](Eigen::VectorXd v) -> Eigen::VectorXd { return v - axis * axis.dot(v); };
  std::vector<double> level(C);
  for (std::size_t c = 0; c < C; ++c) level[c] = C > 1 ? static_cast<double>(c) / static_cast<double>(C - 1) : 0.0;
  std::shuffle(level.begin(), level.end(), rng);
  for (std::size_t c = 0; c < C; ++c) {
    out.class_means.push_back(base + spec.brightness_contrast * level[c] * base +
                              spec.class_separation * off_axis(detail::gaussian_matrix(dt, 1, rng).col(0)) / std::sqrt(2.0));
    Eigen::MatrixXd F = spec.class_spread * detail::gaussian_matrix(dt, dt, rng) / std::sqrt(static_cast<double>(dt));
    F -= axis * (axis.transpose() * F);
    out.class_factors.push_back(std::move(F));
  }
  if (spec.mixing == Mixing::IdentityPadded) {
    out.mixing = Eigen::MatrixXd::Zero(ds, dt);
    out.mixing.topRows(dt).setIdentity();
  } else {
    out.mixing = detail::gaussian_matrix(ds, dt, rng) / std::sqrt(static_cast<double>(dt));
  }

  std::normal_distribution<double> n01(0.0, 1.0);
  auto gaussian = [&](Eigen::Index dim) {
    Eigen::VectorXd z(dim);
    for (Eigen::Index i = 0; i < dim; ++i) z[i] = n01(rng);
    return z;
  };
  // Spectra of one image in target space: class mean + cell offset + pixel noise.
  auto render = [&](const LabelMap& labels, const std::vector<std::size_t>& cell) {
    std::vector<Eigen::VectorXd> offsets(static_cast<std::size_t>(spec.sites));
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const auto cls = k % C;
      offsets[k] = out.class_factors[cls] * gaussian(dt);
    }
    std::vector<Eigen::VectorXd> spectra(labels.pixels());
    for (PixelIndex p = 0; p < labels.pixels(); ++p) {
      const auto cls = static_cast<std::size_t>(labels[p] - 1);
      spectra[p] = out.class_means[cls] + offsets[cell[p]] + spec.pixel_noise * off_axis(gaussian(dt));
    }
    return spectra;
  };

  const auto n = spec.width * spec.height;
  auto [target_labels, target_cells] = detail::voronoi_layout(spec, rng);
  const auto target_spectra = render(target_labels, target_cells);
  std::vector<float> tv(n * spec.target_bands);
  for (PixelIndex p = 0; p < n; ++p)
    for (Eigen::Index b = 0; b < dt; ++b) tv[static_cast<std::size_t>(b) * n + p] = static_cast<float>(target_spectra[p][b]);
  out.target.cube = HsiCube(spec.width, spec.height, spec.target_bands, std::move(tv));
  out.target.labels = std::move(target_labels);

  auto source_labels = detail::voronoi_layout(spec, rng).first;
  std::vector<float> sv(n * spec.source_bands);
  for (PixelIndex p = 0; p < n; ++p) {
    const auto cls = static_cast<std::size_t>(source_labels[p] - 1);
    const Eigen::VectorXd z = out.class_means[cls] + out.class_factors[cls] * gaussian(dt) + spec.pixel_noise * off_axis(gaussian(dt));
    const Eigen::VectorXd x = out.mixing * z + spec.source_noise * gaussian(ds);
    for (Eigen::Index b = 0; b < ds; ++b) sv[static_cast<std::size_t>(b) * n + p] = static_cast<float>(x[b]);
  }
  out.source.cube = HsiCube(spec.width, spec.height, spec.source_bands, std::move(sv));
  out.source.labels = std::move(source_labels);
  return out;
}

}  // namespace cdcl

#pragma once

// Random walker (RW) and extended random walker (ERW) on an 8-connected
// pixel lattice.
//
// With vertices split into seeded (L) and unseeded (U) sets, the Laplacian
// is partitioned as [[L_L, B], [B^T, L_U]]. For class c with seed indicator
// m_c, RW solves
//     L_U p_c = -B^T m_c
// and ERW, given per-pixel priors lambda_c (rows summing to one), solves
//     (L_U + gamma I) p_c = -B^T m_c + gamma lambda_c.
// Seeded pixels keep their one-hot vectors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"
#include "cdcl/spectral.hpp"

namespace cdcl {

inline constexpr double kDefaultWeightFloor = 1e-6;

/// 8-neighbour lattice with Gaussian intensity weights, stored as a
/// symmetric adjacency list.
class WeightedGraph {
 public:
  struct Edge {
    PixelIndex i;
    PixelIndex j;
    double weight;
  };

  WeightedGraph() = default;

  static WeightedGraph build(const ScalarImage& image, double beta, double weight_floor = kDefaultWeightFloor) {
    if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
    if (!(weight_floor > 0.0)) throw InvalidArgument("weight floor must be positive");
    if (image.values.size() != image.width * image.height || image.values.empty())
      throw InvalidArgument("malformed scalar image");
    for (double v : image.values)
      if (!std::isfinite(v)) throw InvalidArgument("scalar image contains non-finite values");

    WeightedGraph g;
    g.width_ = image.width;
    g.height_ = image.height;
    g.beta_ = beta;
    g.floor_ = weight_floor;
    const std::size_t n = image.values.size();
    g.offsets_.assign(n + 1, 0);
    g.degree_.assign(n, 0.0);
    g.neighbors_.reserve(8 * n);
    g.weights_.reserve(8 * n);

    const auto w = static_cast<long>(image.width);
    const auto h = static_cast<long>(image.height);
    for (long r = 0; r < h; ++r) {
      for (long c = 0; c < w; ++c) {
        const auto p = static_cast<PixelIndex>(r * w + c);
        for (long dr = -1; dr <= 1; ++dr) {
          for (long dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const long rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            const auto q = static_cast<PixelIndex>(rr * w + cc);
            const double wt = edge_weight(image.values[p], image.values[q], beta, weight_floor);
            g.neighbors_.push_back(q);
            g.weights_.push_back(wt);
            g.degree_[p] += wt;
          }
        }
        g.offsets_[p + 1] = g.neighbors_.size();
      }
    }
    return g;
  }

  static double edge_weight(double vi, double vj, double beta, double weight_floor = kDefaultWeightFloor) {
    const double d = vi - vj;
    return std::exp(-beta * d * d) + weight_floor;
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t vertices() const { return degree_.size(); }
  double beta() const { return beta_; }
  double weight_floor() const { return floor_; }
  double degree(PixelIndex p) const { return degree_[p]; }

  std::span<const PixelIndex> neighbors(PixelIndex p) const {
    return std::span<const PixelIndex>(neighbors_).subspan(offsets_[p], offsets_[p + 1] - offsets_[p]);
  }
  std::span<const double> weights(PixelIndex p) const {
    return std::span<const double>(weights_).subspan(offsets_[p], offsets_[p + 1] - offsets_[p]);
  }

  /// Every directed edge (i, j, w); each undirected edge appears twice.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(neighbors_.size());
    for (PixelIndex p = 0; p < vertices(); ++p) {
      const auto nb = neighbors(p);
      const auto wt = weights(p);
      for (std::size_t k = 0; k < nb.size(); ++k) out.push_back({p, nb[k], wt[k]});
    }
    return out;
  }

  /// L = D - W.
  Eigen::SparseMatrix<double> laplacian() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(neighbors_.size() + vertices());
    for (PixelIndex p = 0; p < vertices(); ++p) {
      trips.emplace_back(p, p, degree_[p]);
      const auto nb = neighbors(p);
      const auto wt = weights(p);
      for (std::size_t k = 0; k < nb.size(); ++k) trips.emplace_back(p, nb[k], -wt[k]);
    }
    const auto n = static_cast<Eigen::Index>(vertices());
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(trips.begin(), trips.end());
    return L;
  }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  double beta_ = 0.0;
  double floor_ = kDefaultWeightFloor;
  std::vector<std::size_t> offsets_;
  std::vector<PixelIndex> neighbors_;
  std::vector<double> weights_;
  std::vector<double> degree_;
};

inline WeightedGraph build_graph(const ScalarImage& pc_image, double beta,
                                 double weight_floor = kDefaultWeightFloor) {
  return WeightedGraph::build(pc_image, beta, weight_floor);
}

/// Per-pixel class probabilities, pixel-major (pixel * classes + class-1).
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  ProbabilityMap(std::size_t width, std::size_t height, int classes)
      : width_(width), height_(height), classes_(classes),
        probs_(width * height * static_cast<std::size_t>(classes), 0.0) {
    if (classes < 1) throw InvalidArgument("probability map needs at least one class");
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixels() const { return width_ * height_; }
  int classes() const { return classes_; }

  /// `label` is 1-based.
  double at(PixelIndex p, ClassLabel label) const {
    return probs_[p * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(label - 1)];
  }
  double& at(PixelIndex p, ClassLabel label) {
    return probs_[p * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(label - 1)];
  }

  std::span<const double> row(PixelIndex p) const {
    return std::span<const double>(probs_).subspan(p * static_cast<std::size_t>(classes_),
                                                   static_cast<std::size_t>(classes_));
  }
  std::span<double> row(PixelIndex p) {
    return std::span<double>(probs_).subspan(p * static_cast<std::size_t>(classes_),
                                             static_cast<std::size_t>(classes_));
  }
  std::span<const double> data() const { return probs_; }

  /// Label with the largest probability; ties go to the lowest class.
  ClassLabel argmax(PixelIndex p) const {
    const auto r = row(p);
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.size(); ++c)
      if (r[c] > r[best]) best = c;
    return static_cast<ClassLabel>(best + 1);
  }

  double max_probability(PixelIndex p) const { return at(p, argmax(p)); }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  int classes_ = 0;
  std::vector<double> probs_;
};

/// Seed pixels with their labels; indices unique and labels in 1..classes.
class SeedSet {
 public:
  SeedSet() = default;
  explicit SeedSet(std::vector<LabeledPixel> entries) : entries_(std::move(entries)) {
    std::vector<PixelIndex> idx;
    idx.reserve(entries_.size());
    for (const auto& e : entries_) {
      if (e.label < 1) throw InvalidArgument("seed label must be >= 1");
      idx.push_back(e.pixel);
    }
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
      throw InvalidArgument("seed pixel indices must be unique");
  }

  std::span<const LabeledPixel> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<LabeledPixel> entries_;
};

enum class SolverKind { Auto, Direct, ConjugateGradient };

struct SolverOptions {
  SolverKind kind = SolverKind::Auto;
  double tolerance = 1e-8;           // relative residual
  std::size_t direct_limit = 300000;  // Auto switches to CG above this many unknowns
  std::size_t iteration_factor = 10;  // CG cap = factor * unknowns
};

namespace detail {

inline void check_seeds(const WeightedGraph& graph, const SeedSet& seeds, int classes) {
  if (classes < 1) throw InvalidArgument("class count must be positive");
  if (seeds.empty()) throw InvalidArgument("seed set is empty");
  std::vector<int> per_class(static_cast<std::size_t>(classes), 0);
  for (const auto& e : seeds.entries()) {
    if (e.pixel >= graph.vertices()) throw InvalidArgument("seed pixel outside the graph");
    if (e.label > classes) throw InvalidArgument("seed label exceeds class count");
    ++per_class[static_cast<std::size_t>(e.label - 1)];
  }
  for (int c = 0; c < classes; ++c)
    if (per_class[static_cast<std::size_t>(c)] == 0)
      throw InvalidArgument("class " + std::to_string(c + 1) + " has no seeds");
}

// Checks that priors are (numerically) row-stochastic and returns them
// renormalized per pixel.
inline std::vector<double> normalized_priors(const ProbabilityMap& priors) {
  constexpr double kSlack = 1e-6;
  const auto C = static_cast<std::size_t>(priors.classes());
  std::vector<double> out(priors.data().begin(), priors.data().end());
  for (std::size_t p = 0; p < priors.pixels(); ++p) {
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double& v = out[p * C + c];
      if (!std::isfinite(v) || v < -kSlack) throw InvalidArgument("priors are not row-stochastic at pixel " + std::to_string(p));
      v = std::max(v, 0.0);
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSlack) throw InvalidArgument("priors are not row-stochastic at pixel " + std::to_string(p));
    for (std::size_t c = 0; c < C; ++c) out[p * C + c] /= sum;
  }
  return out;
}

template <typename Solver>
Eigen::MatrixXd solve_columns(Solver& solver, const Eigen::SparseMatrix<double>& A, const Eigen::MatrixXd& B,
                              double tolerance) {
  Eigen::MatrixXd X(B.rows(), B.cols());
  for (Eigen::Index c = 0; c < B.cols(); ++c) {
    Eigen::VectorXd b = B.col(c);
    Eigen::VectorXd x = solver.solve(b);
    if (solver.info() != Eigen::Success) throw NumericalError("linear solve failed for class " + std::to_string(c + 1));
    const double bn = std::max(b.norm(), std::numeric_limits<double>::min());
    // A few refinement steps if rounding left the residual above tolerance.
    for (int refine = 0; refine < 3; ++refine) {
      Eigen::VectorXd r = b - A * x;
      if (r.norm() <= tolerance * bn) break;
      x += solver.solve(r);
    }
    if ((b - A * x).norm() > tolerance * bn)
      throw NumericalError("solver did not reach the residual tolerance for class " + std::to_string(c + 1));
    X.col(c) = x;
  }
  return X;
}

// Shared RW/ERW driver; `priors` null means plain RW.
inline ProbabilityMap random_walker_solve(const WeightedGraph& graph, const SeedSet& seeds, int classes,
                                          const std::vector<double>* priors, double gamma,
                                          const SolverOptions& opts) {
  check_seeds(graph, seeds, classes);
  const std::size_t n = graph.vertices();
  const auto C = static_cast<std::size_t>(classes);

  std::vector<int> seed_label(n, 0);
  for (const auto& e : seeds.entries()) seed_label[e.pixel] = e.label;
  std::vector<long> unknown(n, -1);
  std::vector<PixelIndex> unknown_pixels;
  for (PixelIndex p = 0; p < n; ++p) {
    if (seed_label[p] == 0) {
      unknown[p] = static_cast<long>(unknown_pixels.size());
      unknown_pixels.push_back(p);
    }
  }

  ProbabilityMap out(graph.width(), graph.height(), classes);
  for (PixelIndex p = 0; p < n; ++p)
    if (seed_label[p] != 0) out.at(p, seed_label[p]) = 1.0;
  const auto m = static_cast<Eigen::Index>(unknown_pixels.size());
  if (m == 0) return out;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(unknown_pixels.size() * 9);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(C));
  for (Eigen::Index u = 0; u < m; ++u) {
    const PixelIndex p = unknown_pixels[static_cast<std::size_t>(u)];
    trips.emplace_back(u, u, graph.degree(p) + gamma);
    const auto nb = graph.neighbors(p);
    const auto wt = graph.weights(p);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const auto q = nb[k];
      if (unknown[q] >= 0) {
        trips.emplace_back(u, unknown[q], -wt[k]);
      } else {
        rhs(u, seed_label[q] - 1) += wt[k];
      }
    }
    if (priors != nullptr) {
      for (std::size_t c = 0; c < C; ++c) rhs(u, static_cast<Eigen::Index>(c)) += gamma * (*priors)[p * C + c];
    }
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trips.begin(), trips.end());

  const bool direct = opts.kind == SolverKind::Direct ||
                      (opts.kind == SolverKind::Auto && unknown_pixels.size() <= opts.direct_limit);
  Eigen::MatrixXd X;
  if (direct) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw NumericalError("sparse factorization of the walker system failed");
    X = solve_columns(solver, A, rhs, opts.tolerance);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        solver(A);
    solver.setTolerance(opts.tolerance);
    solver.setMaxIterations(static_cast<Eigen::Index>(opts.iteration_factor * unknown_pixels.size()));
    X = solve_columns(solver, A, rhs, opts.tolerance);
  }

  for (Eigen::Index u = 0; u < m; ++u) {
    const PixelIndex p = unknown_pixels[static_cast<std::size_t>(u)];
    for (std::size_t c = 0; c < C; ++c) out.row(p)[c] = X(u, static_cast<Eigen::Index>(c));
  }
  return out;
}

}  // namespace detail

/// Random walker probabilities: minimizes p_c^T L p_c per class with the
/// seeds as Dirichlet boundary conditions.
inline ProbabilityMap rw_solve(const WeightedGraph& graph, const SeedSet& seeds, int classes,
                               const SolverOptions& opts = {}) {
  return detail::random_walker_solve(graph, seeds, classes, nullptr, 0.0, opts);
}

/// Extended random walker: adds gamma times the aspatial prior energy.
inline ProbabilityMap erw_solve(const WeightedGraph& graph, const SeedSet& seeds, const ProbabilityMap& priors,
                                double gamma, const SolverOptions& opts = {}) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be finite and >= 0");
  if (priors.pixels() != graph.vertices()) throw InvalidArgument("priors do not match the graph size");
  const auto lambda = detail::normalized_priors(priors);
  return detail::random_walker_solve(graph, seeds, priors.classes(), &lambda, gamma, opts);
}

inline LabelMap argmax_segmentation(const ProbabilityMap& pm) {
  LabelMap seg(pm.width(), pm.height());
  for (PixelIndex p = 0; p < pm.pixels(); ++p) seg.set(p, pm.argmax(p));
  return seg;
}

}  // namespace cdcl

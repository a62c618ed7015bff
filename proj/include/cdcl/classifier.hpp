#pragma once

// L2-regularized multinomial logistic regression with internal feature
// standardization and stratified k-fold selection of the regularization
// strength. Objective, for weights W (classes x (d+1), last column bias):
//
//   f(W) = 1/2 ||W_{:,0..d-1}||^2 + C * sum_i [ logsumexp(W x_i) - (W x_i)_{y_i} ]
//
// minimized with L-BFGS.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdcl/error.hpp"

namespace cdcl {

struct LinearModel {
  Eigen::MatrixXd weights;      // classes x (feature_dim + 1), bias last
  Eigen::VectorXd feature_mean;  // standardization, applied before weights
  Eigen::VectorXd feature_scale;
  int class_count = 0;
  Eigen::Index feature_dim = 0;
  double chosen_c = 0.0;
  int iterations = 0;  // optimizer iterations of the final fit
};

/// 2^-3, 2^-2, ..., 2^10.
inline std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int e = -3; e <= 10; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

struct TrainOptions {
  std::vector<double> c_grid = default_c_grid();
  int folds = 5;  // 1 disables cross-validation and uses c_grid.front()
  std::uint64_t rng_seed = 0;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // relative to the initial gradient norm
  int history = 10;
};

namespace detail {

/// Rows of X with a trailing 1 appended.
inline Eigen::MatrixXd augment(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.leftCols(X.cols()) = X;
  A.col(X.cols()).setOnes();
  return A;
}

/// Row-wise softmax of `scores`, in place.
inline void softmax_rows(Eigen::MatrixXd& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - mx).exp();
    scores.row(i) = scores.row(i).cwiseMax(std::numeric_limits<double>::min());
    scores.row(i) /= scores.row(i).sum();
  }
}

/// Objective value; writes the gradient when `grad` is non-null.
/// `Xa` holds augmented standardized samples, `y` 0-based labels.
inline double multinomial_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& Xa, std::span<const int> y,
                                    double c, Eigen::MatrixXd* grad) {
  const Eigen::Index d = Xa.cols() - 1;
  Eigen::MatrixXd scores = Xa * W.transpose();  // n x K
  double loss = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    const double lse = mx + std::log((scores.row(i).array() - mx).exp().sum());
    loss += lse - scores(i, y[static_cast<std::size_t>(i)]);
  }
  const double reg = 0.5 * W.leftCols(d).squaredNorm();
  if (grad != nullptr) {
    softmax_rows(scores);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) scores(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    *grad = c * scores.transpose() * Xa;
    grad->leftCols(d) += W.leftCols(d);
  }
  return reg + c * loss;
}

inline Eigen::MatrixXd lbfgs_minimize(const Eigen::MatrixXd& Xa, std::span<const int> y, int classes, double c,
                                      const TrainOptions& opts, int* iterations) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(classes, Xa.cols());
  Eigen::MatrixXd G;
  double f = multinomial_objective(W, Xa, y, c, &G);
  const double g0 = std::max(1.0, G.norm());
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem;  // (s, y)
  const Eigen::Index n = W.size();

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (G.norm() <= opts.gradient_tolerance * g0) break;
    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(G.data(), n);
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      const auto& [s, yv] = mem[k];
      alpha[k] = s.dot(q) / yv.dot(s);
      q -= alpha[k] * yv;
    }
    if (!mem.empty()) {
      const auto& [s, yv] = mem.back();
      q *= s.dot(yv) / yv.squaredNorm();
    } else {
      q /= std::max(1.0, G.norm());
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const auto& [s, yv] = mem[k];
      const double beta = yv.dot(q) / yv.dot(s);
      q += (alpha[k] - beta) * s;
    }
    Eigen::VectorXd dir = -q;
    const Eigen::VectorXd gvec = Eigen::Map<const Eigen::VectorXd>(G.data(), n);
    double slope = gvec.dot(dir);
    if (!(slope < 0.0)) {
      mem.clear();
      dir = -gvec / std::max(1.0, G.norm());
      slope = gvec.dot(dir);
    }

    // Backtracking line search with the Armijo condition.
    double step = 1.0;
    Eigen::MatrixXd Wn, Gn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      Wn = W + step * Eigen::Map<const Eigen::MatrixXd>(dir.data(), W.rows(), W.cols());
      fn = multinomial_objective(Wn, Xa, y, c, &Gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(Wn.data(), n) - Eigen::Map<const Eigen::VectorXd>(W.data(), n);
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(Gn.data(), n) - gvec;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      mem.emplace_back(std::move(s), std::move(yv));
      if (static_cast<int>(mem.size()) > opts.history) mem.pop_front();
    }
    W = std::move(Wn);
    G = std::move(Gn);
    f = fn;
  }
  if (iterations != nullptr) *iterations = it;
  return W;
}

inline void check_training_data(const Eigen::MatrixXd& X, std::span<const int> y, int classes) {
  if (classes < 1) throw InvalidArgument("class count must be positive");
  if (X.rows() != static_cast<Eigen::Index>(y.size())) throw InvalidArgument("sample and label counts differ");
  if (X.rows() < classes) throw InvalidArgument("fewer samples than classes");
  if (!X.allFinite()) throw InvalidArgument("non-finite features");
  std::vector<int> seen(static_cast<std::size_t>(classes), 0);
  for (int l : y) {
    if (l < 1 || l > classes) throw InvalidArgument("label " + std::to_string(l) + " outside 1.." + std::to_string(classes));
    ++seen[static_cast<std::size_t>(l - 1)];
  }
  for (int c = 0; c < classes; ++c)
    if (seen[static_cast<std::size_t>(c)] == 0) throw InvalidArgument("class " + std::to_string(c + 1) + " absent from the labels");
}

}  // namespace detail

/// Fits the model at a fixed regularization strength `c`.
inline LinearModel train_fixed(const Eigen::MatrixXd& X, std::span<const int> y, int classes, double c,
                               const TrainOptions& opts = {}) {
  detail::check_training_data(X, y, classes);
  if (!(c > 0.0)) throw InvalidArgument("regularization strength must be positive");
  LinearModel m;
  m.class_count = classes;
  m.feature_dim = X.cols();
  m.chosen_c = c;
  m.feature_mean = X.colwise().mean().transpose();
  m.feature_scale = ((X.rowwise() - m.feature_mean.transpose()).colwise().squaredNorm() / static_cast<double>(X.rows()))
                        .cwiseSqrt()
                        .transpose();
  for (Eigen::Index j = 0; j < m.feature_scale.size(); ++j)
    if (!(m.feature_scale[j] > 1e-12)) m.feature_scale[j] = 1.0;

  Eigen::MatrixXd Z = (X.rowwise() - m.feature_mean.transpose()).array().rowwise() / m.feature_scale.transpose().array();
  std::vector<int> y0(y.begin(), y.end());
  for (auto& l : y0) l -= 1;
  m.weights = detail::lbfgs_minimize(detail::augment(Z), y0, classes, c, opts, &m.iterations);
  return m;
}

/// Softmax of affine scores; one row per sample, columns are classes 1..C.
inline Eigen::MatrixXd predict_proba(const LinearModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.feature_dim)
    throw InvalidArgument("feature dimension " + std::to_string(X.cols()) + " does not match the model's " +
                          std::to_string(model.feature_dim));
  Eigen::MatrixXd Z = (X.rowwise() - model.feature_mean.transpose()).array().rowwise() /
                      model.feature_scale.transpose().array();
  Eigen::MatrixXd scores = detail::augment(Z) * model.weights.transpose();
  detail::softmax_rows(scores);
  return scores;
}

inline std::vector<int> predict(const LinearModel& model, const Eigen::MatrixXd& X) {
  const auto P = predict_proba(model, X);
  std::vector<int> out(static_cast<std::size_t>(P.rows()));
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < P.cols(); ++c)
      if (P(i, c) > P(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return out;
}

/// Stratified fold assignment. Samples are visited in a seeded random order
/// and dealt round-robin within their class, so the partition does not
/// depend on how classes are numbered. Returns the effective fold count,
/// reduced so that every fold holds each class at least once (0 when fewer
/// than two folds are feasible).
inline int stratified_folds(std::span<const int> y, int classes, int folds, std::uint64_t seed,
                            std::vector<int>& fold_of) {
  std::vector<int> counts(static_cast<std::size_t>(classes), 0);
  for (int l : y) ++counts[static_cast<std::size_t>(l - 1)];
  const int min_count = *std::min_element(counts.begin(), counts.end());
  const int k = std::min(folds, min_count);
  if (k < 2) return 0;

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> dealt(static_cast<std::size_t>(classes), 0);
  fold_of.assign(y.size(), 0);
  for (auto i : order) fold_of[i] = dealt[static_cast<std::size_t>(y[i] - 1)]++ % k;
  return k;
}

/// Trains with the regularization strength chosen by stratified k-fold
/// cross-validation (mean fold accuracy, ties to the smaller value).
inline LinearModel train(const Eigen::MatrixXd& X, std::span<const int> y, int classes, const TrainOptions& opts = {}) {
  detail::check_training_data(X, y, classes);
  if (opts.c_grid.empty()) throw InvalidArgument("empty regularization grid");
  if (opts.folds < 1) throw InvalidArgument("fold count must be >= 1");

  std::vector<int> fold_of;
  const int k = opts.folds >= 2 ? stratified_folds(y, classes, opts.folds, opts.rng_seed, fold_of) : 0;
  if (k == 0) return train_fixed(X, y, classes, opts.c_grid.front(), opts);

  double best_c = 0.0;
  double best_acc = -1.0;
  for (double c : opts.c_grid) {
    double acc_sum = 0.0;
    for (int f = 0; f < k; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (std::size_t i = 0; i < y.size(); ++i) (fold_of[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
      Eigen::MatrixXd Xtr = X(tr, Eigen::all);
      Eigen::MatrixXd Xte = X(te, Eigen::all);
      std::vector<int> ytr, yte;
      for (auto i : tr) ytr.push_back(y[static_cast<std::size_t>(i)]);
      for (auto i : te) yte.push_back(y[static_cast<std::size_t>(i)]);
      const auto model = train_fixed(Xtr, ytr, classes, c, opts);
      const auto pred = predict(model, Xte);
      int hit = 0;
      for (std::size_t i = 0; i < yte.size(); ++i) hit += pred[i] == yte[i];
      acc_sum += static_cast<double>(hit) / static_cast<double>(yte.size());
    }
    const double acc = acc_sum / k;
    if (acc > best_acc || (acc == best_acc && c < best_c)) {
      best_acc = acc;
      best_c = c;
    }
  }
  return train_fixed(X, y, classes, best_c, opts);
}

}  // namespace cdcl

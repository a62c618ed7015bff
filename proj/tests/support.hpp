#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They share no code with the library beyond its data types.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cdcl/cube.hpp"
#include "cdcl/rw_graph.hpp"
#include "cdcl/spectral.hpp"
#include "cdcl/subspace.hpp"

namespace oracle {

inline cdcl::ScalarImage random_image(std::size_t w, std::size_t h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cdcl::ScalarImage img{w, h, std::vector<double>(w * h)};
  for (auto& v : img.values) v = u(rng);
  return img;
}

// Dense 8-neighbour weight matrix straight from the weight formula.
inline Eigen::MatrixXd dense_weights(const cdcl::ScalarImage& img, double beta, double floor = 1e-6) {
  const auto n = static_cast<Eigen::Index>(img.values.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  const auto w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c)
      for (long r2 = 0; r2 < h; ++r2)
        for (long c2 = 0; c2 < w; ++c2) {
          if (r == r2 && c == c2) continue;
          if (std::labs(r - r2) > 1 || std::labs(c - c2) > 1) continue;
          const double d = img.values[static_cast<std::size_t>(r * w + c)] - img.values[static_cast<std::size_t>(r2 * w + c2)];
          W(r * w + c, r2 * w + c2) = std::exp(-beta * d * d) + floor;
        }
  return W;
}

// Solves (L_U + gamma I) X = -B^T M + gamma Lambda densely; seeded rows are one-hot.
inline Eigen::MatrixXd dense_walker(const Eigen::MatrixXd& W, const std::vector<int>& seed_label, int classes,
                                    const Eigen::MatrixXd* priors, double gamma) {
  const auto n = W.rows();
  Eigen::MatrixXd L = -W;
  for (Eigen::Index i = 0; i < n; ++i) L(i, i) = W.row(i).sum();
  std::vector<Eigen::Index> U, S;
  for (Eigen::Index i = 0; i < n; ++i) (seed_label[static_cast<std::size_t>(i)] ? S : U).push_back(i);
  const auto m = static_cast<Eigen::Index>(U.size());
  Eigen::MatrixXd A(m, m), rhs = Eigen::MatrixXd::Zero(m, classes);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) A(a, b) = L(U[a], U[b]);
    A(a, a) += gamma;
    for (auto s : S) rhs(a, seed_label[static_cast<std::size_t>(s)] - 1) -= L(U[a], s);
    if (priors) rhs.row(a) += gamma * priors->row(U[a]);
  }
  const Eigen::MatrixXd X = A.fullPivLu().solve(rhs);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, classes);
  for (auto s : S) P(s, seed_label[static_cast<std::size_t>(s)] - 1) = 1.0;
  for (Eigen::Index a = 0; a < m; ++a) P.row(U[a]) = X.row(a);
  return P;
}

// Covariances by explicit enumeration of every within-class pair.
struct PairCovariances {
  Eigen::MatrixXd st, ss, tt;
  double M = 0.0;
};

inline PairCovariances naive_pairs(const cdcl::ClusteredSamples& src, const cdcl::ClusteredSamples& tgt, bool center) {
  const auto ds = src.front().cols(), dt = tgt.front().cols();
  std::vector<Eigen::VectorXd> a, b;
  for (std::size_t c = 0; c < src.size(); ++c)
    for (Eigen::Index i = 0; i < src[c].rows(); ++i)
      for (Eigen::Index j = 0; j < tgt[c].rows(); ++j) {
        a.emplace_back(src[c].row(i).transpose());
        b.emplace_back(tgt[c].row(j).transpose());
      }
  Eigen::VectorXd ma = Eigen::VectorXd::Zero(ds), mb = Eigen::VectorXd::Zero(dt);
  if (center) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      ma += a[k];
      mb += b[k];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
  }
  PairCovariances out{Eigen::MatrixXd::Zero(ds, dt), Eigen::MatrixXd::Zero(ds, ds), Eigen::MatrixXd::Zero(dt, dt),
                      static_cast<double>(a.size())};
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Eigen::VectorXd x = a[k] - ma, y = b[k] - mb;
    out.st += x * y.transpose();
    out.ss += x * x.transpose();
    out.tt += y * y.transpose();
  }
  out.st /= out.M;
  out.ss /= out.M;
  out.tt /= out.M;
  return out;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = n01(rng);
  return M;
}

inline std::vector<std::vector<long>> naive_confusion(const std::vector<int>& truth, const std::vector<int>& pred,
                                                      int classes) {
  std::vector<std::vector<long>> m(static_cast<std::size_t>(classes), std::vector<long>(static_cast<std::size_t>(classes), 0));
  for (int a = 1; a <= classes; ++a)
    for (int b = 1; b <= classes; ++b)
      for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == a && pred[i] == b) ++m[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(b - 1)];
  return m;
}

}  // namespace oracle

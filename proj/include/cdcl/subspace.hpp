#pragma once

// Canonical correlation analysis over cluster correspondences.
//
// Every source sample of class c is paired with every target sample of the
// same class, giving M = sum_c |S_c| |T_c| correspondences. The covariances
// over those pairs are accumulated from per-class sums and scatters, so the
// cost is linear in the number of samples rather than in M.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdcl/error.hpp"

namespace cdcl {

/// Samples of one domain grouped by class: element c-1 holds the rows of class c.
using ClusteredSamples = std::vector<Eigen::MatrixXd>;

enum class Domain { Source, Target };

struct ClusterStats {
  std::vector<Eigen::VectorXd> source_sum;
  std::vector<Eigen::VectorXd> target_sum;
  std::vector<double> source_count;
  std::vector<double> target_count;
  std::vector<Eigen::MatrixXd> source_scatter;  // sum_i x x^T
  std::vector<Eigen::MatrixXd> target_scatter;
  double correspondences = 0.0;  // M
};

struct CorrelationCovariances {
  Eigen::MatrixXd st;
  Eigen::MatrixXd ss;
  Eigen::MatrixXd tt;
  double correspondences = 0.0;
  Eigen::VectorXd source_mean;  // zero when uncentered
  Eigen::VectorXd target_mean;
};

/// Projection bases for the two domains, ordered by descending correlation.
struct ProjectionPair {
  Eigen::MatrixXd source_basis;  // d_s x d
  Eigen::MatrixXd target_basis;  // d_t x d
  Eigen::VectorXd rho;
  Eigen::VectorXd source_mean;
  Eigen::VectorXd target_mean;

  Eigen::Index components() const { return rho.size(); }
};

namespace detail {

inline void check_clusters(const ClusteredSamples& src, const ClusteredSamples& tgt) {
  if (src.empty() || src.size() != tgt.size())
    throw InvalidArgument("source and target must have the same, nonzero number of clusters");
  for (std::size_t c = 0; c < src.size(); ++c) {
    if (src[c].rows() == 0 || tgt[c].rows() == 0)
      throw InvalidArgument("class " + std::to_string(c + 1) + " is empty in " +
                            (src[c].rows() == 0 ? "the source" : "the target") + " domain");
    if (src[c].cols() != src.front().cols() || tgt[c].cols() != tgt.front().cols())
      throw InvalidArgument("inconsistent sample dimensions within a domain");
    if (!src[c].allFinite() || !tgt[c].allFinite()) throw InvalidArgument("non-finite samples");
  }
}

inline ClusterStats cluster_stats(const ClusteredSamples& src, const ClusteredSamples& tgt,
                                  const Eigen::VectorXd& mu_s, const Eigen::VectorXd& mu_t) {
  ClusterStats st;
  for (std::size_t c = 0; c < src.size(); ++c) {
    Eigen::MatrixXd xs = src[c].rowwise() - mu_s.transpose();
    Eigen::MatrixXd xt = tgt[c].rowwise() - mu_t.transpose();
    st.source_sum.push_back(xs.colwise().sum().transpose());
    st.target_sum.push_back(xt.colwise().sum().transpose());
    st.source_count.push_back(static_cast<double>(xs.rows()));
    st.target_count.push_back(static_cast<double>(xt.rows()));
    st.source_scatter.push_back(xs.transpose() * xs);
    st.target_scatter.push_back(xt.transpose() * xt);
    st.correspondences += st.source_count.back() * st.target_count.back();
  }
  return st;
}

}  // namespace detail

/// Correspondence-weighted covariances. With `center` set, each domain is
/// first shifted by its mean over all correspondences (a source sample of
/// class c counts |T_c| times); otherwise raw second moments are returned.
inline CorrelationCovariances ccca_covariances(const ClusteredSamples& source, const ClusteredSamples& target,
                                               bool center = true) {
  detail::check_clusters(source, target);
  const auto ds = source.front().cols();
  const auto dt = target.front().cols();

  CorrelationCovariances out;
  out.source_mean = Eigen::VectorXd::Zero(ds);
  out.target_mean = Eigen::VectorXd::Zero(dt);
  if (center) {
    double m = 0.0;
    for (std::size_t c = 0; c < source.size(); ++c) {
      const double ns = static_cast<double>(source[c].rows());
      const double nt = static_cast<double>(target[c].rows());
      out.source_mean += nt * source[c].colwise().sum().transpose();
      out.target_mean += ns * target[c].colwise().sum().transpose();
      m += ns * nt;
    }
    out.source_mean /= m;
    out.target_mean /= m;
  }

  const auto stats = detail::cluster_stats(source, target, out.source_mean, out.target_mean);
  const double M = stats.correspondences;
  out.correspondences = M;
  out.st = Eigen::MatrixXd::Zero(ds, dt);
  out.ss = Eigen::MatrixXd::Zero(ds, ds);
  out.tt = Eigen::MatrixXd::Zero(dt, dt);
  for (std::size_t c = 0; c < source.size(); ++c) {
    out.st += stats.source_sum[c] * stats.target_sum[c].transpose();
    out.ss += stats.target_count[c] * stats.source_scatter[c];
    out.tt += stats.source_count[c] * stats.target_scatter[c];
  }
  out.st /= M;
  out.ss /= M;
  out.tt /= M;
  return out;
}

struct RidgeOptions {
  double scale = 1e-6;  // epsilon = scale * trace / dim, per domain
  int retries = 2;      // each retry multiplies epsilon by 10
};

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> ridged_cholesky(const Eigen::MatrixXd& S, const RidgeOptions& ridge,
                                                   const char* which) {
  const auto dim = static_cast<double>(S.rows());
  const double level = std::max(S.trace() / dim, std::numeric_limits<double>::min());
  double eps = ridge.scale * level;
  for (int attempt = 0; attempt <= ridge.retries; ++attempt) {
    Eigen::MatrixXd R = S;
    R.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() == Eigen::Success)
      return llt;
    eps = eps > 0.0 ? eps * 10.0 : 1e-10 * level;
  }
  throw NumericalError(std::string("Cholesky of the ") + which + " scatter failed after ridge escalation");
}

}  // namespace detail

/// Solves the CCA eigenproblem by whitening both domains with Cholesky
/// factors of the ridged scatters and taking the SVD of the whitened cross
/// covariance. Returns min(d_s, d_t) components.
inline ProjectionPair solve_correlation_subspace(const CorrelationCovariances& cov, const RidgeOptions& ridge = {}) {
  const auto ds = cov.ss.rows();
  const auto dt = cov.tt.rows();
  if (cov.ss.cols() != ds || cov.tt.cols() != dt || cov.st.rows() != ds || cov.st.cols() != dt)
    throw InvalidArgument("covariance dimensions are inconsistent");
  if (!cov.ss.allFinite() || !cov.tt.allFinite() || !cov.st.allFinite())
    throw InvalidArgument("non-finite covariance entries");

  const auto llt_s = detail::ridged_cholesky(cov.ss, ridge, "source");
  const auto llt_t = detail::ridged_cholesky(cov.tt, ridge, "target");
  const Eigen::MatrixXd Ls = llt_s.matrixL();
  const Eigen::MatrixXd Lt = llt_t.matrixL();

  // K = Ls^{-1} S_st Lt^{-T}
  Eigen::MatrixXd K = Ls.triangularView<Eigen::Lower>().solve(cov.st);
  K = Lt.triangularView<Eigen::Lower>().solve(K.transpose()).transpose();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index d = std::min(ds, dt);

  ProjectionPair pair;
  pair.rho = svd.singularValues().head(d).cwiseMax(0.0).cwiseMin(1.0);
  pair.source_basis = Ls.transpose().triangularView<Eigen::Upper>().solve(svd.matrixU().leftCols(d));
  pair.target_basis = Lt.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV().leftCols(d));
  pair.source_mean = cov.source_mean;
  pair.target_mean = cov.target_mean;
  return pair;
}

/// Keeps the components with rho >= threshold, or the single best one when
/// none qualifies.
inline ProjectionPair select_components(const ProjectionPair& pair, double rho_threshold) {
  Eigen::Index keep = 0;
  while (keep < pair.rho.size() && pair.rho[keep] >= rho_threshold) ++keep;
  keep = std::max<Eigen::Index>(keep, std::min<Eigen::Index>(1, pair.rho.size()));
  ProjectionPair out;
  out.source_basis = pair.source_basis.leftCols(keep);
  out.target_basis = pair.target_basis.leftCols(keep);
  out.rho = pair.rho.head(keep);
  out.source_mean = pair.source_mean;
  out.target_mean = pair.target_mean;
  return out;
}

/// Rows of `samples` centered by the domain mean and projected on its basis.
inline Eigen::MatrixXd project(const ProjectionPair& pair, const Eigen::MatrixXd& samples, Domain domain) {
  const auto& basis = domain == Domain::Source ? pair.source_basis : pair.target_basis;
  const auto& mean = domain == Domain::Source ? pair.source_mean : pair.target_mean;
  if (samples.cols() != basis.rows())
    throw InvalidArgument("sample dimension " + std::to_string(samples.cols()) + " does not match the " +
                          (domain == Domain::Source ? "source" : "target") + " basis dimension " +
                          std::to_string(basis.rows()));
  return (samples.rowwise() - mean.transpose()) * basis;
}

/// Cluster CCA with every class as one cluster.
inline ProjectionPair ccca(const ClusteredSamples& source, const ClusteredSamples& target,
                           const RidgeOptions& ridge = {}, bool center = true) {
  return solve_correlation_subspace(ccca_covariances(source, target, center), ridge);
}

/// Ordinary CCA on row-aligned pairs (row i of `source` corresponds to row i of `target`).
inline ProjectionPair paired_cca(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                                 const RidgeOptions& ridge = {}, bool center = true) {
  if (source.rows() != target.rows() || source.rows() == 0)
    throw InvalidArgument("paired CCA needs equally many, nonzero rows");
  ClusteredSamples s, t;
  for (Eigen::Index i = 0; i < source.rows(); ++i) {
    s.emplace_back(source.row(i));
    t.emplace_back(target.row(i));
  }
  return ccca(s, t, ridge, center);
}

/// CCA baseline: within each class, randomly pairs min(|S_c|, |T_c|)
/// samples without replacement and runs paired CCA on the union.
inline ProjectionPair cca_pair_baseline(const ClusteredSamples& source, const ClusteredSamples& target,
                                        std::uint64_t rng_seed, const RidgeOptions& ridge = {}) {
  detail::check_clusters(source, target);
  std::mt19937_64 rng(rng_seed);
  std::vector<Eigen::VectorXd> ps, pt;
  for (std::size_t c = 0; c < source.size(); ++c) {
    std::vector<Eigen::Index> is(static_cast<std::size_t>(source[c].rows()));
    std::vector<Eigen::Index> it(static_cast<std::size_t>(target[c].rows()));
    std::iota(is.begin(), is.end(), 0);
    std::iota(it.begin(), it.end(), 0);
    std::shuffle(is.begin(), is.end(), rng);
    std::shuffle(it.begin(), it.end(), rng);
    const auto n = std::min(is.size(), it.size());
    for (std::size_t k = 0; k < n; ++k) {
      ps.emplace_back(source[c].row(is[k]).transpose());
      pt.emplace_back(target[c].row(it[k]).transpose());
    }
  }
  Eigen::MatrixXd S(static_cast<Eigen::Index>(ps.size()), source.front().cols());
  Eigen::MatrixXd T(static_cast<Eigen::Index>(pt.size()), target.front().cols());
  for (std::size_t k = 0; k < ps.size(); ++k) {
    S.row(static_cast<Eigen::Index>(k)) = ps[k].transpose();
    T.row(static_cast<Eigen::Index>(k)) = pt[k].transpose();
  }
  return paired_cca(S, T, ridge);
}

}  // namespace cdcl

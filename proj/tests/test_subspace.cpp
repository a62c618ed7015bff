#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cdcl/subspace.hpp"
#include "support.hpp"

using namespace cdcl;

namespace {

RidgeOptions no_ridge() { return RidgeOptions{0.0, 2}; }

ClusteredSamples random_clusters(const std::vector<Eigen::Index>& sizes, Eigen::Index dim, std::mt19937_64& rng,
                                 double spread = 1.0) {
  ClusteredSamples out;
  for (auto n : sizes) {
    Eigen::MatrixXd X = oracle::gaussian(n, dim, rng);
    const Eigen::RowVectorXd shift = spread * oracle::gaussian(1, dim, rng);
    X.rowwise() += shift;
    out.push_back(X);
  }
  return out;
}

// Correlated clustered samples: target rows are a linear map of latent class
// structure shared with the source.
std::pair<ClusteredSamples, ClusteredSamples> linked_clusters(int classes, Eigen::Index ns, Eigen::Index nt,
                                                              Eigen::Index ds, Eigen::Index dt, std::mt19937_64& rng) {
  ClusteredSamples s, t;
  const Eigen::MatrixXd A = oracle::gaussian(3, ds, rng), B = oracle::gaussian(3, dt, rng);
  for (int c = 0; c < classes; ++c) {
    const Eigen::RowVectorXd z = 2.0 * oracle::gaussian(1, 3, rng);
    Eigen::MatrixXd xs = 0.5 * oracle::gaussian(ns, ds, rng), xt = 0.5 * oracle::gaussian(nt, dt, rng);
    xs.rowwise() += z * A;
    xt.rowwise() += z * B;
    s.push_back(xs);
    t.push_back(xt);
  }
  return {s, t};
}

}  // namespace

TEST(CorrelationCovariances, OneDimensionalHandExample) {
  ClusteredSamples s = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, -1.0)};
  Eigen::MatrixXd t1(2, 1);
  t1 << 2, 4;
  ClusteredSamples t = {t1, Eigen::MatrixXd::Constant(1, 1, -2.0)};
  const auto cov = ccca_covariances(s, t, false);
  EXPECT_DOUBLE_EQ(cov.correspondences, 3.0);
  EXPECT_NEAR(cov.st(0, 0), 8.0 / 3.0, 1e-14);
  EXPECT_NEAR(cov.ss(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(cov.tt(0, 0), 8.0, 1e-14);
  const auto pair = solve_correlation_subspace(cov, no_ridge());
  EXPECT_NEAR(pair.rho[0], (8.0 / 3.0) / std::sqrt(8.0), 1e-12);
}

TEST(CorrelationCovariances, PerfectlyCorrelatedLine) {
  Eigen::MatrixXd s(5, 1), t(5, 1);
  s << -2, -1, 0, 1, 3;
  t = 2.0 * s;
  const auto pair = paired_cca(s, t, no_ridge());
  EXPECT_NEAR(pair.rho[0], 1.0, 1e-12);
}

TEST(CorrelationCovariances, MatchesPairEnumeration) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<Eigen::Index> count(1, 15), dim(1, 6);
    const int classes = 1 + trial % 5;
    std::vector<Eigen::Index> ns, nt;
    for (int c = 0; c < classes; ++c) {
      ns.push_back(count(rng));
      nt.push_back(count(rng));
    }
    const auto s = random_clusters(ns, dim(rng), rng, 3.0);
    const auto t = random_clusters(nt, dim(rng), rng, 3.0);
    for (bool center : {false, true}) {
      const auto fast = ccca_covariances(s, t, center);
      const auto slow = oracle::naive_pairs(s, t, center);
      ASSERT_LE(slow.M, 10000.0);
      EXPECT_EQ(fast.correspondences, slow.M);
      EXPECT_LE((fast.st - slow.st).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((fast.ss - slow.ss).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((fast.tt - slow.tt).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(CorrelationCovariances, TargetScalingIsBilinear) {
  std::mt19937_64 rng(5);
  const auto s = random_clusters({4, 6}, 3, rng);
  auto t = random_clusters({5, 2}, 2, rng);
  const auto a = ccca_covariances(s, t);
  for (auto& m : t) m *= 2.5;
  const auto b = ccca_covariances(s, t);
  EXPECT_LE((b.st - 2.5 * a.st).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((b.tt - 6.25 * a.tt).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CorrelationCovariances, EmptyClassRejected) {
  ClusteredSamples s = {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd(0, 2)};
  ClusteredSamples t = {Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(1, 3)};
  EXPECT_THROW(ccca_covariances(s, t), InvalidArgument);
}

TEST(Subspace, SingletonClustersEqualPairedCca) {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd S = oracle::gaussian(40, 4, rng);
  const Eigen::MatrixXd T = S * oracle::gaussian(4, 6, rng) + 0.7 * oracle::gaussian(40, 6, rng);
  ClusteredSamples s, t;
  for (Eigen::Index i = 0; i < 40; ++i) {
    s.emplace_back(S.row(i));
    t.emplace_back(T.row(i));
  }
  const auto a = ccca(s, t);
  const auto b = paired_cca(S, T);
  EXPECT_LE((a.rho - b.rho).cwiseAbs().maxCoeff(), 1e-8);

  // Independent paired CCA: rho as singular values of Sss^{-1/2} Sst Stt^{-1/2}.
  const Eigen::MatrixXd Sc = S.rowwise() - S.colwise().mean(), Tc = T.rowwise() - T.colwise().mean();
  const Eigen::MatrixXd Css = Sc.transpose() * Sc / 40.0, Ctt = Tc.transpose() * Tc / 40.0,
                        Cst = Sc.transpose() * Tc / 40.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Css), et(Ctt);
  const Eigen::MatrixXd K = es.operatorInverseSqrt() * Cst * et.operatorInverseSqrt();
  const Eigen::VectorXd want = Eigen::JacobiSVD<Eigen::MatrixXd>(K).singularValues();
  const auto exact = paired_cca(S, T, no_ridge());
  EXPECT_LE((exact.rho - want.head(4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Subspace, SpectrumInvariantUnderInvertibleTransforms) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    auto [s, t] = linked_clusters(4, 12, 9, 3, 4, rng);
    const auto base = ccca(s, t, no_ridge());
    Eigen::MatrixXd A = oracle::gaussian(3, 3, rng) + 3.0 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd B = oracle::gaussian(4, 4, rng) + 3.0 * Eigen::MatrixXd::Identity(4, 4);
    for (auto& m : s) m = m * A;
    for (auto& m : t) m = m * B;
    const auto moved = ccca(s, t, no_ridge());
    EXPECT_LE((base.rho - moved.rho).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(Subspace, SwappingDomainsSwapsBases) {
  std::mt19937_64 rng(2);
  const auto [s, t] = linked_clusters(3, 10, 7, 4, 5, rng);
  const auto a = ccca(s, t), b = ccca(t, s);
  EXPECT_LE((a.rho - b.rho).cwiseAbs().maxCoeff(), 1e-10);
  // Three centered classes give a rank-2 cross term; beyond that the bases are arbitrary.
  for (Eigen::Index k = 0; k < 2; ++k) {
    const double sign = a.source_basis.col(k).dot(b.target_basis.col(k)) >= 0 ? 1.0 : -1.0;
    EXPECT_LE((a.source_basis.col(k) - sign * b.target_basis.col(k)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((a.target_basis.col(k) - sign * b.source_basis.col(k)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Subspace, BasesAreScatterOrthonormalAndRhoSorted) {
  std::mt19937_64 rng(9);
  const auto [s, t] = linked_clusters(5, 8, 6, 6, 4, rng);
  const auto cov = ccca_covariances(s, t);
  const auto pair = solve_correlation_subspace(cov, no_ridge());
  ASSERT_EQ(pair.components(), 4);
  const Eigen::MatrixXd Gs = pair.source_basis.transpose() * cov.ss * pair.source_basis;
  const Eigen::MatrixXd Gt = pair.target_basis.transpose() * cov.tt * pair.target_basis;
  EXPECT_LE((Gs - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((Gt - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  for (Eigen::Index k = 0; k < 4; ++k) {
    EXPECT_GE(pair.rho[k], 0.0);
    EXPECT_LE(pair.rho[k], 1.0);
    if (k > 0) EXPECT_LE(pair.rho[k], pair.rho[k - 1]);
  }
  // The cross term is diagonal with the correlations.
  const Eigen::MatrixXd G = pair.source_basis.transpose() * cov.st * pair.target_basis;
  EXPECT_LE((G - Eigen::MatrixXd(pair.rho.asDiagonal())).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Subspace, ProjectedPairsReproduceCorrelations) {
  std::mt19937_64 rng(13);
  const auto [s, t] = linked_clusters(4, 9, 5, 5, 3, rng);
  const auto pair = ccca(s, t, no_ridge());
  // Recompute each component's correlation over all within-class pairs from projected data.
  for (Eigen::Index k = 0; k < pair.components(); ++k) {
    double sxy = 0, sxx = 0, syy = 0, mx = 0, my = 0, M = 0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t c = 0; c < s.size(); ++c) {
      const Eigen::MatrixXd ps = project(pair, s[c], Domain::Source), pt = project(pair, t[c], Domain::Target);
      for (Eigen::Index i = 0; i < ps.rows(); ++i)
        for (Eigen::Index j = 0; j < pt.rows(); ++j) pts.emplace_back(ps(i, k), pt(j, k));
    }
    for (auto [x, y] : pts) {
      mx += x;
      my += y;
      M += 1;
    }
    mx /= M;
    my /= M;
    for (auto [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
      syy += (y - my) * (y - my);
    }
    EXPECT_NEAR(std::abs(mx), 0.0, 1e-9);
    EXPECT_NEAR(sxy / std::sqrt(sxx * syy), pair.rho[k], 1e-6);
  }
}

TEST(Subspace, IndependentDomainsHaveLowCorrelation) {
  std::mt19937_64 rng(77);
  const Eigen::MatrixXd S = oracle::gaussian(10000, 5, rng), T = oracle::gaussian(10000, 5, rng);
  EXPECT_LT(paired_cca(S, T).rho[0], 0.3);
}

TEST(Subspace, ProjectionContract) {
  std::mt19937_64 rng(3);
  const auto [s, t] = linked_clusters(3, 6, 6, 4, 3, rng);
  const auto pair = ccca(s, t);
  const Eigen::MatrixXd mean_row = pair.source_mean.transpose();
  EXPECT_LE(project(pair, mean_row, Domain::Source).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd once = project(pair, s[0], Domain::Source);
  EXPECT_THROW(project(pair, once, Domain::Source), InvalidArgument);
}

TEST(Subspace, ComponentSelection) {
  ProjectionPair p;
  p.rho = Eigen::Vector3d(0.9, 0.6, 0.4);
  p.source_basis = Eigen::MatrixXd::Identity(3, 3);
  p.target_basis = Eigen::MatrixXd::Identity(4, 3);
  EXPECT_EQ(select_components(p, 0.5).components(), 2);
  EXPECT_EQ(select_components(p, 0.0).components(), 3);
  p.rho = Eigen::Vector3d(0.3, 0.2, 0.1);
  const auto one = select_components(p, 0.5);
  EXPECT_EQ(one.components(), 1);
  EXPECT_EQ(one.target_basis.cols(), 1);
}

TEST(CcaBaseline, DeterministicAndSingletonsMatchCcca) {
  std::mt19937_64 rng(8);
  const auto [s, t] = linked_clusters(3, 10, 4, 4, 3, rng);
  const auto a = cca_pair_baseline(s, t, 5), b = cca_pair_baseline(s, t, 5);
  EXPECT_EQ(a.rho, b.rho);
  EXPECT_EQ(a.source_basis, b.source_basis);

  ClusteredSamples s1, t1;
  for (std::size_t c = 0; c < s.size(); ++c) {
    s1.emplace_back(s[c].topRows(1));
    t1.emplace_back(t[c].topRows(1));
  }
  EXPECT_LE((cca_pair_baseline(s1, t1, 1).rho - ccca(s1, t1).rho).cwiseAbs().maxCoeff(), 1e-12);
}

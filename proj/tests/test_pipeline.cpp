#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cdcl/engine.hpp"
#include "cdcl/metrics.hpp"
#include "cdcl/pseudolabel.hpp"
#include "cdcl/sampling.hpp"
#include "cdcl/synthetic.hpp"
#include "support.hpp"

using namespace cdcl;

namespace {

ProbabilityMap map_with(std::size_t pixels, int classes, const std::vector<std::vector<double>>& rows) {
  ProbabilityMap pm(pixels, 1, classes);
  for (std::size_t p = 0; p < rows.size(); ++p)
    for (int c = 1; c <= classes; ++c) pm.at(p, c) = rows[p][static_cast<std::size_t>(c - 1)];
  return pm;
}

LabelMap row_labels(std::vector<std::uint16_t> v) {
  const auto n = v.size();
  return LabelMap(n, 1, std::move(v));
}

struct Scenario {
  SyntheticDataset data;
  ExperimentSplit split;
  CdclInputs inputs() const {
    return CdclInputs{data.source.cube, split.source_train, data.target.cube, split.target_train, split.classes,
                      split.target_test};
  }
};

Scenario desk_scenario(std::uint64_t seed, const SyntheticSpec& spec = {}) {
  Scenario s{generate_synthetic(spec, seed), {}};
  s.split = draw_split(s.data.source.labels, s.data.target.labels, 20, 2, TestFraction{1.0}, seed);
  return s;
}

double oa_of(const LabelMap& pred, const ExperimentSplit& split) {
  return evaluate(pred, split.target_test, split.classes).oa;
}

}  // namespace

TEST(LabelVerification, AgreementOnly) {
  TrainingSet empty;
  const auto c = label_verification(row_labels({1, 2, 3, 1}), row_labels({1, 1, 3, 2}), empty);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (LabeledPixel{0, 1}));
  EXPECT_EQ(c[1], (LabeledPixel{2, 3}));
  EXPECT_TRUE(label_verification(row_labels({1, 1}), row_labels({2, 2}), empty).empty());
}

TEST(LabelVerification, ExcludesTrainingPixelsAndChecksSize) {
  const std::vector<LabeledPixel> init = {{1, 2}};
  TrainingSet ts(init);
  const auto c = label_verification(row_labels({1, 2, 2}), row_labels({1, 2, 2}), ts);
  EXPECT_EQ(c.size(), 2u);
  for (const auto& e : c) EXPECT_NE(e.pixel, 1u);
  EXPECT_THROW(label_verification(row_labels({1}), row_labels({1, 2}), ts), InvalidArgument);
}

TEST(Mbt, TopPWithinOneClass) {
  const auto pm = map_with(3, 2, {{0.95, 0.05}, {0.9, 0.1}, {0.8, 0.2}});
  const std::vector<LabeledPixel> cand = {{2, 1}, {0, 1}, {1, 1}};
  const auto out = mbt_select(cand, pm, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].pixel, 0u);
  EXPECT_EQ(out[1].pixel, 1u);
}

TEST(Mbt, RoundRobinAcrossClasses) {
  // A: pixels 0 (0.9) and 1 (0.7); B: pixel 2 (0.99).
  const auto pm = map_with(3, 2, {{0.9, 0.1}, {0.7, 0.3}, {0.01, 0.99}});
  const std::vector<LabeledPixel> cand = {{1, 1}, {2, 2}, {0, 1}};
  const auto out = mbt_select(cand, pm, 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], (LabeledPixel{0, 1}));
  EXPECT_EQ(out[1], (LabeledPixel{2, 2}));
  EXPECT_EQ(out[2], (LabeledPixel{1, 1}));
  EXPECT_EQ(mbt_select(cand, pm, 10).size(), 3u);
  EXPECT_TRUE(mbt_select({}, pm, 10).empty());
  EXPECT_THROW(mbt_select(cand, pm, 0), InvalidArgument);
}

TEST(TargetClusters, StrictlyAboveClassMean) {
  const auto pm = map_with(4, 2, {{0.7, 0.3}, {0.5, 0.5}, {0.4, 0.6}, {0.4, 0.6}});
  const std::vector<LabeledPixel> cand = {{0, 1}, {1, 1}, {2, 2}, {3, 2}};
  const std::vector<LabeledPixel> init = {{9, 1}, {8, 2}};
  const auto tc = extract_target_clusters(cand, pm, init);
  EXPECT_EQ(tc.members[0], (std::vector<PixelIndex>{0, 9}));
  // Equal probabilities never exceed their own mean.
  EXPECT_EQ(tc.members[1], (std::vector<PixelIndex>{8}));
}

TEST(TargetClusters, MatchesBruteForceRule) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::uniform_int_distribution<int> lab(1, 3);
  const std::size_t n = 40;
  std::vector<std::vector<double>> rows;
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<double> r = {u(rng), u(rng), u(rng)};
    const double s = r[0] + r[1] + r[2];
    for (auto& v : r) v /= s;
    rows.push_back(r);
  }
  const auto pm = map_with(n, 3, rows);
  std::vector<LabeledPixel> cand;
  for (PixelIndex p = 2; p < n; ++p) cand.push_back({p, lab(rng)});
  const std::vector<LabeledPixel> init = {{0, 1}, {1, 3}};
  const auto tc = extract_target_clusters(cand, pm, init);
  for (int c = 1; c <= 3; ++c) {
    double sum = 0;
    int cnt = 0;
    for (const auto& e : cand)
      if (e.label == c) {
        sum += *std::max_element(rows[e.pixel].begin(), rows[e.pixel].end());
        ++cnt;
      }
    std::vector<PixelIndex> want;
    for (const auto& e : init)
      if (e.label == c) want.push_back(e.pixel);
    for (const auto& e : cand)
      if (e.label == c && *std::max_element(rows[e.pixel].begin(), rows[e.pixel].end()) > sum / cnt)
        want.push_back(e.pixel);
    std::sort(want.begin(), want.end());
    EXPECT_EQ(tc.members[static_cast<std::size_t>(c - 1)], want) << "class " << c;
  }
}

TEST(PseudolabelRound, UniformPriorsZeroGammaAgreeEverywhere) {
  std::mt19937_64 rng(5);
  const auto g = WeightedGraph::build(oracle::random_image(6, 5, rng), 710);
  const std::vector<LabeledPixel> init = {{0, 1}, {29, 2}};
  TrainingSet ts(init);
  ProbabilityMap priors(6, 5, 2);
  for (PixelIndex p = 0; p < 30; ++p) priors.at(p, 1) = priors.at(p, 2) = 0.5;
  PseudolabelParams params;
  params.gamma = 0.0;
  params.query_p = 4;
  const auto r = pseudolabel_round(g, ts, priors, params, 1);
  EXPECT_EQ(r.candidates.size(), 28u);
  EXPECT_EQ(r.ts.size(), 6u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(r.ts.entries()[i].origin, Origin::Initial);
  for (std::size_t k = 0; k < r.clusters.members.size(); ++k)
    for (std::size_t j = k + 1; j < r.clusters.members.size(); ++j)
      for (auto p : r.clusters.members[k])
        EXPECT_EQ(std::count(r.clusters.members[j].begin(), r.clusters.members[j].end(), p), 0);
}

TEST(TrainingSetInvariants, RejectsDuplicates) {
  TrainingSet ts(std::vector<LabeledPixel>{{3, 1}});
  EXPECT_THROW(ts.add({3, 2, Origin::Pseudo, 1}), InvalidArgument);
  EXPECT_THROW(ts.add({4, 0, Origin::Pseudo, 1}), InvalidArgument);
}

TEST(Convergence, FivePercentRule) {
  EXPECT_TRUE(convergence_check(200, 240, 1000, 0.05));
  EXPECT_FALSE(convergence_check(200, 260, 1000, 0.05));
  EXPECT_TRUE(convergence_check(300, 200, 1000, 0.05));
  EXPECT_FALSE(convergence_check(0, 50, 1000, 0.05));
}

TEST(Engine, DefaultsArePublishedValues) {
  CdclParams p;
  EXPECT_EQ(p.beta, 710.0);
  EXPECT_EQ(p.gamma, 1e-5);
  EXPECT_EQ(p.rho_threshold, 0.5);
  EXPECT_EQ(p.query_p, 10u);
  EXPECT_EQ(p.conv_fraction, 0.05);
  EXPECT_EQ(p.max_iterations, 20);
}

TEST(Engine, IterationBoundsAndHistory) {
  const auto s = desk_scenario(1);
  CdclParams one;
  one.max_iterations = 1;
  const auto r = run_cdcl(s.inputs(), one);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.audit.size(), 2u);

  CdclParams loose;
  loose.conv_fraction = 1.0;
  EXPECT_EQ(run_cdcl(s.inputs(), loose).history.size(), 1u);

  const auto full = run_cdcl(s.inputs(), CdclParams{});
  std::size_t prev = s.split.target_train.size();
  for (const auto& rec : full.history) {
    EXPECT_GT(rec.ts_size, prev);
    EXPECT_LE(rec.ts_size - prev, 2 * CdclParams{}.query_p);
    prev = rec.ts_size;
  }
  EXPECT_LE(full.history.size(), 20u);
}

TEST(Engine, DeterministicGivenSeed) {
  const auto s = desk_scenario(2);
  const auto a = run_cdcl(s.inputs(), CdclParams{}), b = run_cdcl(s.inputs(), CdclParams{});
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(std::equal(a.probabilities.data().begin(), a.probabilities.data().end(), b.probabilities.data().begin()));
}

TEST(Engine, MissingClassInTrainingIsDataError) {
  auto s = desk_scenario(3);
  std::erase_if(s.split.target_train, [](const LabeledPixel& e) { return e.label == 2; });
  EXPECT_THROW(run_cdcl(s.inputs(), CdclParams{}), DataError);
}

TEST(Engine, PseudolabelsAreAccurateOnSynthetic) {
  std::size_t added = 0, correct = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = desk_scenario(seed);
    const auto r = run_cdcl(s.inputs(), CdclParams{});
    for (const auto& e : r.training_set.entries()) {
      if (e.origin != Origin::Pseudo) continue;
      ++added;
      correct += s.data.target.labels[e.pixel] == e.label;
    }
  }
  ASSERT_GT(added, 0u);
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(added), 0.95);
}

TEST(Engine, IdenticalDomainsNotWorseThanTargetOnly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = generate_synthetic(SyntheticSpec{}, seed);
    const auto split = draw_split(ds.target.labels, ds.target.labels, 20, 2, TestFraction{1.0}, seed);
    const CdclInputs in{ds.target.cube, split.source_train, ds.target.cube, split.target_train, split.classes,
                        split.target_test};
    const double cdcl = oa_of(run_cdcl(in, CdclParams{}).labels, split);
    const double na = oa_of(run_baseline(Baseline::NA, in, CdclParams{}).labels, split);
    EXPECT_GE(cdcl, na) << "seed " << seed;
  }
}

TEST(Baselines, TargetOnlyStrongOnSeparableData) {
  SyntheticSpec spec;
  spec.pixel_noise = 0.5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = desk_scenario(seed, spec);
    EXPECT_GE(oa_of(run_baseline(Baseline::NA, s.inputs(), CdclParams{}).labels, s.split), 0.95) << "seed " << seed;
  }
}

TEST(Baselines, LargeGammaWalkerFollowsTargetOnlyLabels) {
  const auto s = desk_scenario(4);
  CdclParams p;
  p.gamma = 1e6;
  const auto na = run_baseline(Baseline::NA, s.inputs(), p);
  const auto erw = run_baseline(Baseline::ERW, s.inputs(), p);
  std::set<PixelIndex> seeds;
  for (const auto& e : s.split.target_train) seeds.insert(e.pixel);
  std::size_t differ = 0;
  for (PixelIndex q = 0; q < na.labels.pixels(); ++q)
    if (!seeds.count(q)) differ += na.labels[q] != erw.labels[q];
  EXPECT_EQ(differ, 0u);
}

TEST(Baselines, AllMethodsRunAndParse) {
  const auto s = desk_scenario(5);
  for (const char* name : {"na", "cca", "ccca", "erw"}) {
    const auto r = run_baseline(parse_baseline(name), s.inputs(), CdclParams{});
    EXPECT_GT(oa_of(r.labels, s.split), 1.0 / 5.0) << name;
  }
  EXPECT_THROW(parse_baseline("svm"), InvalidArgument);
}

TEST(Metrics, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int C = 2 + trial % 6;
    std::uniform_int_distribution<int> lab(1, C);
    std::vector<int> t(200), p(200);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = lab(rng);
      p[i] = lab(rng) % 3 == 0 ? lab(rng) : t[i];
    }
    const auto r = compute_metrics(t, p, C);
    const auto m = oracle::naive_confusion(t, p, C);
    EXPECT_EQ(r.confusion, m);
    double n = 0, diag = 0, pe = 0, aa = 0;
    int present = 0;
    for (int a = 0; a < C; ++a) {
      double rs = 0, cs = 0;
      for (int b = 0; b < C; ++b) {
        rs += m[a][b];
        cs += m[b][a];
        n += m[a][b];
      }
      diag += m[a][a];
      pe += rs * cs;
      if (rs > 0) {
        aa += m[a][a] / rs;
        ++present;
      }
    }
    pe /= n * n;
    EXPECT_EQ(r.oa, diag / n);
    EXPECT_DOUBLE_EQ(r.aa, aa / present);
    EXPECT_DOUBLE_EQ(r.kappa, (diag / n - pe) / (1 - pe));
  }
}

TEST(Metrics, TwoClassHandExample) {
  std::vector<int> t, p;
  auto push = [&](int a, int b, int k) {
    for (int i = 0; i < k; ++i) {
      t.push_back(a);
      p.push_back(b);
    }
  };
  push(1, 1, 40);
  push(1, 2, 10);
  push(2, 1, 20);
  push(2, 2, 30);
  const auto r = compute_metrics(t, p, 2);
  EXPECT_DOUBLE_EQ(r.oa, 0.7);
  EXPECT_NEAR(r.kappa, 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(r.aa, 0.7);
}

TEST(Metrics, ChanceAgreementGivesZeroKappa) {
  // Prediction independent of the truth with matching marginals.
  const std::vector<int> t = {1, 1, 2, 2}, p = {1, 2, 1, 2};
  const auto r = compute_metrics(t, p, 2);
  EXPECT_DOUBLE_EQ(r.oa, 0.5);
  EXPECT_NEAR(r.kappa, 0.0, 1e-15);
}

TEST(Metrics, AbsentClassExcludedFromAverage) {
  const std::vector<int> t = {1, 1, 2}, p = {1, 3, 2};
  const auto r = compute_metrics(t, p, 3);
  EXPECT_DOUBLE_EQ(r.aa, 0.75);
  EXPECT_TRUE(std::isnan(r.per_class_accuracy[2]));
  EXPECT_THROW(compute_metrics(t, std::vector<int>{1, 4, 2}, 3), InvalidArgument);
}

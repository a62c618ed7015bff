#pragma once

// The cross-domain collaborative learning loop:
//
//   repeat
//     train on TS, estimate P1 over the target image
//     pseudolabel round with (TS, P1)          -> TS, target clusters
//     cluster CCA of source labels vs clusters -> correlation subspace (rho >= rho_T)
//     train on projected source + initial target labels, estimate P2
//     pseudolabel round with (TS, P2)          -> TS
//   until the target-cluster growth falls below conv_fraction of the unlabeled pixels
//   final ERW with TS and P2

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdcl/classifier.hpp"
#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"
#include "cdcl/pseudolabel.hpp"
#include "cdcl/rw_graph.hpp"
#include "cdcl/spectral.hpp"
#include "cdcl/subspace.hpp"

namespace cdcl {

struct CdclParams {
  double beta = 710.0;
  double gamma = 1e-5;
  double rho_threshold = 0.5;
  std::size_t query_p = 10;
  double conv_fraction = 0.05;
  int max_iterations = 20;
  std::vector<double> c_grid = default_c_grid();
  int folds = 5;
  std::uint64_t rng_seed = 0;
  SolverOptions solver{};
  RidgeOptions ridge{};

  void validate() const {
    if (!(beta > 0.0)) throw InvalidArgument("beta must be > 0");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be >= 0");
    if (!(rho_threshold >= 0.0 && rho_threshold <= 1.0)) throw InvalidArgument("rho_threshold must lie in [0, 1]");
    if (query_p < 1) throw InvalidArgument("query_p must be >= 1");
    if (!(conv_fraction > 0.0 && conv_fraction <= 1.0)) throw InvalidArgument("conv_fraction must lie in (0, 1]");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (c_grid.empty()) throw InvalidArgument("c_grid must not be empty");
    if (folds < 1) throw InvalidArgument("folds must be >= 1");
  }

  TrainOptions train_options() const {
    TrainOptions t;
    t.c_grid = c_grid;
    t.folds = folds;
    t.rng_seed = rng_seed;
    return t;
  }

  PseudolabelParams pseudolabel_params() const { return {gamma, query_p, solver}; }
};

/// Labeled inputs of one experiment. `evaluation`, when non-empty, is used
/// only to report per-iteration accuracy.
struct CdclInputs {
  const HsiCube& source;
  std::vector<LabeledPixel> source_train;
  const HsiCube& target;
  std::vector<LabeledPixel> target_train;
  int classes = 0;
  std::vector<LabeledPixel> evaluation{};
};

struct IterationRecord {
  int iteration = 0;
  std::size_t ts_size = 0;
  std::vector<std::size_t> tc_sizes;
  std::size_t tc_pseudo_total = 0;
  Eigen::Index components = 0;
  std::vector<double> rho;
  std::optional<double> test_oa;
  bool converged = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["iteration"] = iteration;
    j["ts_size"] = ts_size;
    j["tc_sizes"] = tc_sizes;
    j["tc_pseudo_total"] = tc_pseudo_total;
    j["components"] = components;
    j["rho"] = rho;
    j["test_oa"] = test_oa ? nlohmann::ordered_json(*test_oa) : nlohmann::ordered_json(nullptr);
    j["converged"] = converged;
    return j;
  }
};

using CdclHistory = std::vector<IterationRecord>;

/// Wall-clock seconds accumulated per named stage.
using StageTimings = std::map<std::string, double>;

struct CdclResult {
  LabelMap labels;
  ProbabilityMap probabilities;
  CdclHistory history;
  TrainingSet training_set;
  ProjectionPair projection;  // from the last iteration
  std::vector<RoundAudit> audit;
  StageTimings timings;
};

/// True when the target-cluster growth is below conv_fraction of the
/// unlabeled pixel count.
inline bool convergence_check(std::size_t prev_tc_total, std::size_t new_tc_total, std::size_t unlabeled_total,
                              double conv_fraction) {
  const double increase = static_cast<double>(new_tc_total) - static_cast<double>(prev_tc_total);
  return increase < conv_fraction * static_cast<double>(unlabeled_total);
}

namespace detail {

class StageClock {
 public:
  StageClock(StageTimings& t, std::string name)
      : timings_(t), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    timings_[name_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  StageClock(const StageClock&) = delete;
  StageClock& operator=(const StageClock&) = delete;

 private:
  StageTimings& timings_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

inline std::vector<PixelIndex> pixels_of(std::span<const LabeledPixel> v) {
  std::vector<PixelIndex> p;
  p.reserve(v.size());
  for (const auto& e : v) p.push_back(e.pixel);
  return p;
}

inline std::vector<int> labels_of(std::span<const LabeledPixel> v) {
  std::vector<int> l;
  l.reserve(v.size());
  for (const auto& e : v) l.push_back(e.label);
  return l;
}

inline ClusteredSamples clusters_from(const HsiCube& cube, std::span<const LabeledPixel> labeled, int classes) {
  std::vector<std::vector<PixelIndex>> by_class(static_cast<std::size_t>(classes));
  for (const auto& e : labeled) by_class[static_cast<std::size_t>(e.label - 1)].push_back(e.pixel);
  ClusteredSamples out;
  for (const auto& px : by_class) out.push_back(cube.gather(px));
  return out;
}

inline ClusteredSamples clusters_from(const HsiCube& cube, const TargetClusters& tc) {
  ClusteredSamples out;
  for (const auto& px : tc.members) out.push_back(cube.gather(px));
  return out;
}

/// Class probabilities for every pixel of `cube`, optionally after
/// projecting the spectra into a correlation subspace.
inline ProbabilityMap classify_cube(const LinearModel& model, const HsiCube& cube, const ProjectionPair* pair,
                                    Domain domain) {
  ProbabilityMap pm(cube.width(), cube.height(), model.class_count);
  constexpr std::size_t chunk = 8192;
  const std::size_t n = cube.pixels();
  for (std::size_t first = 0; first < n; first += chunk) {
    const auto count = std::min(chunk, n - first);
    Eigen::MatrixXd X = cube.gather_range(first, count);
    if (pair != nullptr) X = project(*pair, X, domain);
    const Eigen::MatrixXd P = predict_proba(model, X);
    for (std::size_t i = 0; i < count; ++i)
      for (int c = 0; c < model.class_count; ++c) pm.at(first + i, c + 1) = P(static_cast<Eigen::Index>(i), c);
  }
  return pm;
}

/// Trains on projected source labels stacked over projected target labels.
inline LinearModel train_on_projection(const ProjectionPair& pair, const HsiCube& source,
                                       std::span<const LabeledPixel> source_train, const HsiCube& target,
                                       std::span<const LabeledPixel> target_train, int classes,
                                       const TrainOptions& opts) {
  const Eigen::MatrixXd Xs = project(pair, source.gather(pixels_of(source_train)), Domain::Source);
  const Eigen::MatrixXd Xt = project(pair, target.gather(pixels_of(target_train)), Domain::Target);
  Eigen::MatrixXd X(Xs.rows() + Xt.rows(), Xs.cols());
  X << Xs, Xt;
  auto y = labels_of(source_train);
  const auto yt = labels_of(target_train);
  y.insert(y.end(), yt.begin(), yt.end());
  return train(X, y, classes, opts);
}

inline double accuracy_on(const ProbabilityMap& pm, std::span<const LabeledPixel> truth) {
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& e : truth) hit += pm.argmax(e.pixel) == e.label;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

inline void check_inputs(const CdclInputs& in) {
  if (in.classes < 1) throw InvalidArgument("class count must be positive");
  auto check = [&](std::span<const LabeledPixel> v, const HsiCube& cube, const char* what) {
    std::vector<int> seen(static_cast<std::size_t>(in.classes), 0);
    for (const auto& e : v) {
      if (e.pixel >= cube.pixels()) throw InvalidArgument(std::string(what) + " pixel outside the image");
      if (e.label < 1 || e.label > in.classes) throw InvalidArgument(std::string(what) + " label outside 1..C");
      ++seen[static_cast<std::size_t>(e.label - 1)];
    }
    for (int c = 0; c < in.classes; ++c)
      if (seen[static_cast<std::size_t>(c)] == 0)
        throw DataError(std::string(what) + " has no samples of class " + std::to_string(c + 1));
  };
  check(in.source_train, in.source, "source training set");
  check(in.target_train, in.target, "target training set");
}

}  // namespace detail

/// Graph over the first principal component of the target image.
inline WeightedGraph target_graph(const HsiCube& target, double beta) {
  return build_graph(first_principal_component(target), beta);
}

inline CdclResult run_cdcl(const CdclInputs& in, const CdclParams& params) {
  params.validate();
  detail::check_inputs(in);
  const int C = in.classes;
  const auto topts = params.train_options();
  const auto plp = params.pseudolabel_params();

  CdclResult res;
  WeightedGraph graph;
  {
    detail::StageClock clock(res.timings, "graph");
    graph = target_graph(in.target, params.beta);
  }
  const auto source_clusters = detail::clusters_from(in.source, in.source_train, C);
  TrainingSet ts(in.target_train);
  const std::size_t unlabeled_total = in.target.pixels() - in.target_train.size();
  std::size_t prev_tc = 0;
  ProbabilityMap p2;

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    ProbabilityMap p1;
    {
      detail::StageClock clock(res.timings, "classify_target");
      const auto labeled = ts.labeled();
      const auto model = train(in.target.gather(detail::pixels_of(labeled)), detail::labels_of(labeled), C, topts);
      p1 = detail::classify_cube(model, in.target, nullptr, Domain::Target);
    }
    RoundResult r1;
    {
      detail::StageClock clock(res.timings, "pseudolabel");
      r1 = pseudolabel_round(graph, ts, p1, plp, iter, "before_alignment");
    }
    ts = r1.ts;
    res.audit.push_back(r1.audit);

    {
      detail::StageClock clock(res.timings, "alignment");
      const auto target_clusters = detail::clusters_from(in.target, r1.clusters);
      res.projection =
          select_components(ccca(source_clusters, target_clusters, params.ridge), params.rho_threshold);
    }
    {
      detail::StageClock clock(res.timings, "classify_projected");
      const auto model = detail::train_on_projection(res.projection, in.source, in.source_train, in.target,
                                                     in.target_train, C, topts);
      p2 = detail::classify_cube(model, in.target, &res.projection, Domain::Target);
    }
    RoundResult r2;
    {
      detail::StageClock clock(res.timings, "pseudolabel");
      r2 = pseudolabel_round(graph, ts, p2, plp, iter, "after_alignment");
    }
    ts = r2.ts;
    res.audit.push_back(r2.audit);

    for (auto n : ts.class_counts(C))
      if (n == 0) throw NumericalError("class collapse: a class lost all training seeds");

    IterationRecord rec;
    rec.iteration = iter;
    rec.ts_size = ts.size();
    rec.tc_sizes = r1.clusters.sizes();
    rec.tc_pseudo_total = r1.clusters.total() - in.target_train.size();
    rec.components = res.projection.components();
    rec.rho.assign(res.projection.rho.data(), res.projection.rho.data() + res.projection.rho.size());
    if (!in.evaluation.empty()) rec.test_oa = detail::accuracy_on(r2.p_erw, in.evaluation);
    rec.converged = convergence_check(prev_tc, rec.tc_pseudo_total, unlabeled_total, params.conv_fraction);
    prev_tc = rec.tc_pseudo_total;
    res.history.push_back(rec);
    if (rec.converged) break;
  }

  {
    detail::StageClock clock(res.timings, "final_erw");
    res.probabilities = erw_solve(graph, ts.seeds(), p2, params.gamma, params.solver);
    res.labels = argmax_segmentation(res.probabilities);
  }
  res.training_set = std::move(ts);
  return res;
}

enum class Baseline { NA, CCA, CCCA, ERW };

inline std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::NA: return "na";
    case Baseline::CCA: return "cca";
    case Baseline::CCCA: return "ccca";
    case Baseline::ERW: return "erw";
  }
  return "?";
}

inline Baseline parse_baseline(const std::string& name) {
  if (name == "na" || name == "NA") return Baseline::NA;
  if (name == "cca" || name == "CCA") return Baseline::CCA;
  if (name == "ccca" || name == "CCCA" || name == "c-cca" || name == "C-CCA") return Baseline::CCCA;
  if (name == "erw" || name == "ERW") return Baseline::ERW;
  throw InvalidArgument("unknown baseline \"" + name + "\" (expected na, cca, ccca or erw)");
}

struct BaselineResult {
  LabelMap labels;
  ProbabilityMap probabilities;
  std::optional<ProjectionPair> projection;
};

/// Single-shot comparison methods: no iteration, no pseudolabeling.
inline BaselineResult run_baseline(Baseline method, const CdclInputs& in, const CdclParams& params) {
  params.validate();
  detail::check_inputs(in);
  const int C = in.classes;
  const auto topts = params.train_options();
  BaselineResult res;

  switch (method) {
    case Baseline::NA:
    case Baseline::ERW: {
      const auto model = train(in.target.gather(detail::pixels_of(in.target_train)),
                               detail::labels_of(in.target_train), C, topts);
      res.probabilities = detail::classify_cube(model, in.target, nullptr, Domain::Target);
      if (method == Baseline::ERW) {
        const auto graph = target_graph(in.target, params.beta);
        res.probabilities = erw_solve(graph, SeedSet(in.target_train), res.probabilities, params.gamma, params.solver);
      }
      break;
    }
    case Baseline::CCA:
    case Baseline::CCCA: {
      const auto src = detail::clusters_from(in.source, in.source_train, C);
      const auto tgt = detail::clusters_from(in.target, in.target_train, C);
      const auto full = method == Baseline::CCA ? cca_pair_baseline(src, tgt, params.rng_seed, params.ridge)
                                                : ccca(src, tgt, params.ridge);
      auto pair = select_components(full, params.rho_threshold);
      const auto model = detail::train_on_projection(pair, in.source, in.source_train, in.target, in.target_train,
                                                     C, topts);
      res.probabilities = detail::classify_cube(model, in.target, &pair, Domain::Target);
      res.projection = std::move(pair);
      break;
    }
  }
  res.labels = argmax_segmentation(res.probabilities);
  return res;
}

}  // namespace cdcl

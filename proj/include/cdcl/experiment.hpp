#pragma once

// Turning a configuration into cubes, ground truth and a split, plus the
// published evaluation settings used by the repro harness.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdcl/config.hpp"
#include "cdcl/cube.hpp"
#include "cdcl/engine.hpp"
#include "cdcl/io.hpp"
#include "cdcl/sampling.hpp"
#include "cdcl/spectral.hpp"
#include "cdcl/synthetic.hpp"

namespace cdcl {

struct Experiment {
  HsiCube source;
  HsiCube target;
  LabelMap source_truth;
  LabelMap target_truth;
  ExperimentSplit split;

  // References members; keep the experiment alive while the inputs are used.
  CdclInputs inputs() const {
    return CdclInputs{source, split.source_train, target, split.target_train, split.classes, split.target_test};
  }
};

/// Loads (or synthesizes) both domains and draws the split with `seed`.
inline Experiment prepare_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  Experiment ex;
  if (cfg.synthetic()) {
    auto ds = generate_synthetic(cfg.synth, seed);
    ex.source = std::move(ds.source.cube);
    ex.source_truth = std::move(ds.source.labels);
    ex.target = std::move(ds.target.cube);
    ex.target_truth = std::move(ds.target.labels);
  } else {
    ex.source = load_cube(*cfg.source_cube);
    ex.target = load_cube(*cfg.target_cube);
    ex.source_truth = load_labels(*cfg.source_labels, ex.source.width(), ex.source.height());
    ex.target_truth = load_labels(*cfg.target_labels, ex.target.width(), ex.target.height());
    if (cfg.source_kmeans_bands > 0) {
      if (static_cast<std::size_t>(cfg.source_kmeans_bands) > ex.source.bands())
        throw InvalidArgument("source_kmeans_bands exceeds the source band count");
      ex.source = kmeans_band_reduce(ex.source, cfg.source_kmeans_bands, seed);
    }
  }
  if (ex.source.bands() == ex.target.bands())
    throw DataError("source and target must have different band counts");

  if (cfg.source_training_map || cfg.target_training_map) {
    const auto src_map = cfg.source_training_map
                             ? load_labels(*cfg.source_training_map, ex.source.width(), ex.source.height())
                             : ex.source_truth;
    const auto tgt_map = cfg.target_training_map
                             ? load_labels(*cfg.target_training_map, ex.target.width(), ex.target.height())
                             : ex.target_truth;
    ex.split = draw_split_from_maps(src_map, tgt_map, ex.target_truth, cfg.per_class_source, cfg.per_class_target,
                                    cfg.test_size, seed);
  } else {
    ex.split = draw_split(ex.source_truth, ex.target_truth, cfg.per_class_source, cfg.per_class_target, cfg.test_size,
                          seed);
  }
  return ex;
}

/// One published evaluation setting: split sizes and the reported CDCL OA
/// (percent) per (source, target) labels-per-class pair.
struct ReproCase {
  std::string name;
  double test_fraction = 0.02;
  int source_kmeans_bands = 0;
  std::pair<std::size_t, std::size_t> default_sizes;
  std::map<std::pair<std::size_t, std::size_t>, double> reported_oa;

  std::optional<double> target_for(std::size_t ts, std::size_t tt) const {
    const auto it = reported_oa.find({ts, tt});
    if (it == reported_oa.end()) return std::nullopt;
    return it->second;
  }
};

inline constexpr double kReproTolerance = 4.0;  // OA points
inline constexpr int kReproTrials = 50;

inline const std::vector<ReproCase>& repro_cases() {
  static const std::vector<ReproCase> cases = {
      {"univ_center", 0.02, 0, {50, 2}, {{{50, 2}, 83.24}}},
      {"center_univ",
       0.02,
       0,
       {50, 2},
       {{{10, 2}, 72.35},
        {{20, 2}, 76.41},
        {{50, 2}, 74.83},
        {{10, 3}, 80.04},
        {{20, 3}, 83.52},
        {{50, 3}, 81.35},
        {{10, 5}, 85.60},
        {{20, 5}, 85.66},
        {{50, 5}, 84.55}}},
      {"salinas", 0.02, 50, {50, 2}, {{{50, 2}, 91.55}}},
      {"indian",
       0.10,
       50,
       {15, 5},
       {{{5, 2}, 74.92},
        {{10, 2}, 77.78},
        {{15, 2}, 78.48},
        {{5, 3}, 79.81},
        {{10, 3}, 81.80},
        {{15, 3}, 82.75},
        {{5, 5}, 86.01},
        {{10, 5}, 86.24},
        {{15, 5}, 87.06}}},
  };
  return cases;
}

inline const ReproCase& find_repro_case(const std::string& name) {
  for (const auto& c : repro_cases())
    if (c.name == name) return c;
  throw InvalidArgument("unknown repro case \"" + name + "\" (univ_center, center_univ, salinas, indian)");
}

struct TrialSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

inline TrialSummary summarize(const std::vector<double>& v) {
  TrialSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace cdcl

#pragma once

#include <algorithm>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"
#include "cdcl/rw_graph.hpp"

namespace cdcl {

enum class Origin { Initial, Pseudo };

struct TrainingEntry {
  PixelIndex pixel = 0;
  ClassLabel label = 0;
  Origin origin = Origin::Initial;
  int iteration = 0;
};

/// Labeled plus pseudo-labeled target pixels. Entries are only ever
/// appended, so initial labels are never removed or relabeled.
class TrainingSet {
 public:
  TrainingSet() = default;

  explicit TrainingSet(std::span<const LabeledPixel> initial) {
    for (const auto& e : initial) add({e.pixel, e.label, Origin::Initial, 0});
  }

  void add(const TrainingEntry& e) {
    if (e.label < 1) throw InvalidArgument("training label must be >= 1");
    if (!members_.insert(e.pixel).second)
      throw InvalidArgument("pixel " + std::to_string(e.pixel) + " is already in the training set");
    entries_.push_back(e);
  }

  bool contains(PixelIndex p) const { return members_.count(p) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::span<const TrainingEntry> entries() const { return entries_; }

  std::vector<LabeledPixel> labeled() const {
    std::vector<LabeledPixel> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({e.pixel, e.label});
    return out;
  }

  std::vector<LabeledPixel> initial() const {
    std::vector<LabeledPixel> out;
    for (const auto& e : entries_)
      if (e.origin == Origin::Initial) out.push_back({e.pixel, e.label});
    return out;
  }

  SeedSet seeds() const { return SeedSet(labeled()); }

  std::vector<std::size_t> class_counts(int classes) const {
    std::vector<std::size_t> n(static_cast<std::size_t>(classes), 0);
    for (const auto& e : entries_)
      if (e.label >= 1 && e.label <= classes) ++n[static_cast<std::size_t>(e.label - 1)];
    return n;
  }

 private:
  std::vector<TrainingEntry> entries_;
  std::unordered_set<PixelIndex> members_;
};

/// Per-class target pixel sets feeding cluster CCA; element c-1 is class c.
struct TargetClusters {
  std::vector<std::vector<PixelIndex>> members;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& m : members) n += m.size();
    return n;
  }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    for (const auto& m : members) s.push_back(m.size());
    return s;
  }
};

/// Pixels (outside the training set) on which the RW and ERW segmentations
/// agree, with the agreed label, in ascending pixel order.
inline std::vector<LabeledPixel> label_verification(const LabelMap& s_rw, const LabelMap& s_erw,
                                                    const TrainingSet& ts) {
  if (s_rw.width() != s_erw.width() || s_rw.height() != s_erw.height())
    throw InvalidArgument("segmentations have different dimensions");
  std::vector<LabeledPixel> out;
  for (PixelIndex p = 0; p < s_rw.pixels(); ++p) {
    if (ts.contains(p)) continue;
    if (s_rw[p] == s_erw[p] && s_rw[p] != 0) out.push_back({p, s_rw[p]});
  }
  return out;
}

/// Takes up to `p` candidates, cycling over classes in index order and
/// taking, per turn, the remaining candidate of that class with the highest
/// probability for it. Equal probabilities go to the lower pixel index.
inline std::vector<LabeledPixel> mbt_select(std::span<const LabeledPixel> candidates, const ProbabilityMap& p_erw,
                                            std::size_t p) {
  if (p < 1) throw InvalidArgument("query size must be >= 1");
  const int C = p_erw.classes();
  std::vector<std::vector<LabeledPixel>> by_class(static_cast<std::size_t>(C));
  for (const auto& c : candidates) {
    if (c.label < 1 || c.label > C) throw InvalidArgument("candidate label outside the probability map's classes");
    by_class[static_cast<std::size_t>(c.label - 1)].push_back(c);
  }
  for (auto& v : by_class) {
    std::stable_sort(v.begin(), v.end(), [&](const LabeledPixel& a, const LabeledPixel& b) {
      const double pa = p_erw.at(a.pixel, a.label);
      const double pb = p_erw.at(b.pixel, b.label);
      if (pa != pb) return pa > pb;
      return a.pixel < b.pixel;
    });
  }
  std::vector<std::size_t> next(static_cast<std::size_t>(C), 0);
  std::vector<LabeledPixel> out;
  const std::size_t want = std::min(p, candidates.size());
  while (out.size() < want) {
    for (int c = 0; c < C && out.size() < want; ++c) {
      auto& v = by_class[static_cast<std::size_t>(c)];
      auto& k = next[static_cast<std::size_t>(c)];
      if (k < v.size()) out.push_back(v[k++]);
    }
  }
  return out;
}

/// For each class, keeps the candidates whose largest probability strictly
/// exceeds the class mean of that quantity, plus the initially labeled
/// target pixels of the class.
inline TargetClusters extract_target_clusters(std::span<const LabeledPixel> candidates, const ProbabilityMap& p_erw,
                                              std::span<const LabeledPixel> initial_target) {
  const int C = p_erw.classes();
  std::vector<double> sum(static_cast<std::size_t>(C), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(C), 0);
  for (const auto& c : candidates) {
    if (c.label < 1 || c.label > C) throw InvalidArgument("candidate label outside the probability map's classes");
    sum[static_cast<std::size_t>(c.label - 1)] += p_erw.max_probability(c.pixel);
    ++count[static_cast<std::size_t>(c.label - 1)];
  }
  TargetClusters tc;
  tc.members.resize(static_cast<std::size_t>(C));
  for (const auto& e : initial_target) {
    if (e.label < 1 || e.label > C) throw InvalidArgument("initial label outside the probability map's classes");
    tc.members[static_cast<std::size_t>(e.label - 1)].push_back(e.pixel);
  }
  for (const auto& c : candidates) {
    const auto k = static_cast<std::size_t>(c.label - 1);
    const double mean = sum[k] / static_cast<double>(count[k]);
    if (p_erw.max_probability(c.pixel) > mean) tc.members[k].push_back(c.pixel);
  }
  for (auto& m : tc.members) std::sort(m.begin(), m.end());
  return tc;
}

struct PseudolabelParams {
  double gamma = 1e-5;
  std::size_t query_p = 10;
  SolverOptions solver{};
};

/// One entry of the pseudolabel audit stream.
struct RoundAudit {
  int iteration = 0;
  std::string stage;
  std::size_t ts_size = 0;
  std::vector<std::size_t> tc_sizes;
  std::size_t candidates = 0;
  std::vector<PixelIndex> selected;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["iteration"] = iteration;
    j["stage"] = stage;
    j["ts_size"] = ts_size;
    j["tc_sizes"] = tc_sizes;
    j["candidate_count"] = candidates;
    j["selected"] = selected;
    return j;
  }
};

struct RoundResult {
  TrainingSet ts;
  TargetClusters clusters;
  ProbabilityMap p_erw;
  std::vector<LabeledPixel> candidates;
  std::vector<LabeledPixel> selected;
  RoundAudit audit;
};

/// RW and ERW segmentations seeded by the training set, label verification,
/// selection of new training pixels and target-cluster extraction.
inline RoundResult pseudolabel_round(const WeightedGraph& graph, const TrainingSet& ts, const ProbabilityMap& priors,
                                     const PseudolabelParams& params, int iteration = 0, std::string stage = {}) {
  const int C = priors.classes();
  const auto seeds = ts.seeds();
  const auto p_rw = rw_solve(graph, seeds, C, params.solver);
  auto p_erw = erw_solve(graph, seeds, priors, params.gamma, params.solver);
  const auto s_rw = argmax_segmentation(p_rw);
  const auto s_erw = argmax_segmentation(p_erw);

  RoundResult r;
  r.ts = ts;
  r.candidates = label_verification(s_rw, s_erw, ts);
  r.selected = mbt_select(r.candidates, p_erw, params.query_p);
  for (const auto& s : r.selected) r.ts.add({s.pixel, s.label, Origin::Pseudo, iteration});
  r.clusters = extract_target_clusters(r.candidates, p_erw, ts.initial());
  r.audit.iteration = iteration;
  r.audit.stage = std::move(stage);
  r.audit.ts_size = r.ts.size();
  r.audit.tc_sizes = r.clusters.sizes();
  r.audit.candidates = r.candidates.size();
  for (const auto& s : r.selected) r.audit.selected.push_back(s.pixel);
  r.p_erw = std::move(p_erw);
  return r;
}

}  // namespace cdcl

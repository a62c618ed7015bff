#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"
#include "cdcl/io.hpp"

namespace cdcl {

/// Number of test pixels per class: either a fraction of the labeled target
/// pixels left after training selection, or a fixed count.
struct TestFraction {
  double value = 1.0;
};
struct TestCount {
  std::size_t value = 0;
};
using TestSize = std::variant<TestFraction, TestCount>;

struct ExperimentSplit {
  int classes = 0;
  std::uint64_t rng_seed = 0;
  std::vector<LabeledPixel> source_train;
  std::vector<LabeledPixel> target_train;
  std::vector<LabeledPixel> target_test;

  friend bool operator==(const ExperimentSplit&, const ExperimentSplit&) = default;
};

namespace detail {

inline std::vector<std::vector<PixelIndex>> pixels_by_class(const LabelMap& labels, int classes) {
  std::vector<std::vector<PixelIndex>> out(static_cast<std::size_t>(classes));
  for (PixelIndex p = 0; p < labels.pixels(); ++p) {
    const auto l = labels[p];
    if (l > 0 && l <= classes) out[static_cast<std::size_t>(l - 1)].push_back(p);
  }
  return out;
}

inline std::size_t test_count_for(const TestSize& size, std::size_t remaining) {
  if (const auto* f = std::get_if<TestFraction>(&size)) {
    const auto n = static_cast<std::size_t>(std::llround(f->value * static_cast<double>(remaining)));
    return std::clamp<std::size_t>(n, remaining > 0 ? 1 : 0, remaining);
  }
  return std::get<TestCount>(size).value;
}

}  // namespace detail

/// Per-class uniform sampling without replacement. Target test pixels are
/// drawn from the labeled target pixels not used for training.
inline ExperimentSplit draw_split(const LabelMap& source_labels, const LabelMap& target_labels,
                                  std::size_t per_class_source, std::size_t per_class_target,
                                  const TestSize& test_size, std::uint64_t rng_seed) {
  if (per_class_source == 0) throw InvalidArgument("per-class source count must be positive");
  if (per_class_target == 0)
    throw InvalidArgument("per-class target count must be positive (target labels are required)");
  if (const auto* f = std::get_if<TestFraction>(&test_size); f && !(f->value > 0.0 && f->value <= 1.0))
    throw InvalidArgument("test fraction must lie in (0, 1]");

  const int classes = std::max(source_labels.max_label(), target_labels.max_label());
  if (classes == 0) throw DataError("no labeled pixels in either domain");

  ExperimentSplit split;
  split.classes = classes;
  split.rng_seed = rng_seed;
  std::mt19937_64 rng(rng_seed);

  auto src = detail::pixels_by_class(source_labels, classes);
  auto tgt = detail::pixels_by_class(target_labels, classes);
  for (int c = 1; c <= classes; ++c) {
    auto& pool = src[static_cast<std::size_t>(c - 1)];
    if (pool.size() < per_class_source)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                      " labeled source pixels, " + std::to_string(per_class_source) + " requested");
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < per_class_source; ++i) split.source_train.push_back({pool[i], c});
  }
  for (int c = 1; c <= classes; ++c) {
    auto& pool = tgt[static_cast<std::size_t>(c - 1)];
    if (pool.size() < per_class_target)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                      " labeled target pixels, " + std::to_string(per_class_target) + " requested");
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto remaining = pool.size() - per_class_target;
    const auto n_test = detail::test_count_for(test_size, remaining);
    if (n_test > remaining)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(remaining) +
                      " target pixels left for testing, " + std::to_string(n_test) + " requested");
    for (std::size_t i = 0; i < per_class_target; ++i) split.target_train.push_back({pool[i], c});
    for (std::size_t i = 0; i < n_test; ++i) split.target_test.push_back({pool[per_class_target + i], c});
  }
  return split;
}

/// Variant for datasets with separate training maps: training pixels come
/// from the maps, test pixels from the ground truth minus the target
/// training pixels.
inline ExperimentSplit draw_split_from_maps(const LabelMap& source_map, const LabelMap& target_map,
                                            const LabelMap& target_truth, std::size_t per_class_source,
                                            std::size_t per_class_target, const TestSize& test_size,
                                            std::uint64_t rng_seed) {
  if (target_map.width() != target_truth.width() || target_map.height() != target_truth.height())
    throw DataError("target training map and ground truth differ in size");
  auto split = draw_split(source_map, target_map, per_class_source, per_class_target, TestCount{0}, rng_seed);
  split.classes = std::max(split.classes, target_truth.max_label());

  std::vector<char> used(target_truth.pixels(), 0);
  for (const auto& e : split.target_train) used[e.pixel] = 1;
  auto pools = detail::pixels_by_class(target_truth, split.classes);
  std::mt19937_64 rng(rng_seed ^ 0x5851F42D4C957F2DULL);
  for (int c = 1; c <= split.classes; ++c) {
    auto& pool = pools[static_cast<std::size_t>(c - 1)];
    std::erase_if(pool, [&](PixelIndex p) { return used[p] != 0; });
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto n_test = detail::test_count_for(test_size, pool.size());
    if (n_test > pool.size())
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                      " target pixels left for testing, " + std::to_string(n_test) + " requested");
    for (std::size_t i = 0; i < n_test; ++i) split.target_test.push_back({pool[i], c});
  }
  return split;
}

namespace detail {

inline nlohmann::ordered_json split_role_json(const std::vector<LabeledPixel>& entries, int classes) {
  nlohmann::ordered_json role = nlohmann::ordered_json::object();
  for (int c = 1; c <= classes; ++c) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries)
      if (e.label == c) arr.push_back(e.pixel);
    role[std::to_string(c)] = std::move(arr);
  }
  return role;
}

inline std::vector<LabeledPixel> split_role_from_json(const nlohmann::json& role, int classes) {
  std::vector<LabeledPixel> out;
  for (int c = 1; c <= classes; ++c) {
    const auto key = std::to_string(c);
    if (!role.contains(key)) continue;
    for (const auto& p : role[key]) out.push_back({p.get<PixelIndex>(), c});
  }
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json split_to_json(const ExperimentSplit& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.rng_seed;
  j["classes"] = split.classes;
  j["source_train"] = detail::split_role_json(split.source_train, split.classes);
  j["target_train"] = detail::split_role_json(split.target_train, split.classes);
  j["target_test"] = detail::split_role_json(split.target_test, split.classes);
  return j;
}

inline void save_split(const ExperimentSplit& split, const std::filesystem::path& path) {
  detail::write_text(path, split_to_json(split).dump(2) + "\n");
}

inline ExperimentSplit load_split(const std::filesystem::path& path) {
  const auto j = detail::read_json(path);
  try {
    ExperimentSplit s;
    s.rng_seed = j.at("seed").get<std::uint64_t>();
    s.classes = j.at("classes").get<int>();
    s.source_train = detail::split_role_from_json(j.at("source_train"), s.classes);
    s.target_train = detail::split_role_from_json(j.at("target_train"), s.classes);
    s.target_test = detail::split_role_from_json(j.at("target_test"), s.classes);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed split file " + path.string() + ": " + e.what());
  }
}

}  // namespace cdcl

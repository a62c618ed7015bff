#pragma once

// Experiment configuration: flat UTF-8 text, one `key = value` per line,
// `#` starts a comment. Unknown keys are rejected. Relative paths resolve
// against the directory of the config file.
//
// Without `target_cube` the experiment runs on the synthetic generator,
// configured through the synth_* keys.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdcl/engine.hpp"
#include "cdcl/error.hpp"
#include "cdcl/sampling.hpp"
#include "cdcl/synthetic.hpp"

namespace cdcl {

struct ExperimentConfig {
  std::optional<std::filesystem::path> source_cube;
  std::optional<std::filesystem::path> source_labels;
  std::optional<std::filesystem::path> target_cube;
  std::optional<std::filesystem::path> target_labels;
  // Optional pools the training samples are drawn from; tests still come
  // from the ground truth.
  std::optional<std::filesystem::path> source_training_map;
  std::optional<std::filesystem::path> target_training_map;
  int source_kmeans_bands = 0;  // 0 keeps the source cube as loaded
  std::size_t per_class_source = 20;
  std::size_t per_class_target = 2;
  TestSize test_size = TestFraction{1.0};
  CdclParams params;
  SyntheticSpec synth;

  bool synthetic() const { return !target_cube.has_value(); }
  nlohmann::ordered_json to_json() const;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("config key " + std::string(key) + ": \"" + std::string(v) + "\" is not a number");
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("config key " + std::string(key) + ": \"" + std::string(v) + "\" is not an integer");
  return out;
}

inline std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_double(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw InvalidArgument("config key " + std::string(key) + " needs at least one value");
  return out;
}

inline SolverKind parse_solver(std::string_view v) {
  if (v == "auto") return SolverKind::Auto;
  if (v == "direct") return SolverKind::Direct;
  if (v == "cg") return SolverKind::ConjugateGradient;
  throw InvalidArgument("solver must be auto, direct or cg, got \"" + std::string(v) + "\"");
}

inline std::string solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::Direct: return "direct";
    case SolverKind::ConjugateGradient: return "cg";
    default: return "auto";
  }
}

inline Mixing parse_mixing(std::string_view v) {
  if (v == "random") return Mixing::Random;
  if (v == "identity_padded") return Mixing::IdentityPadded;
  throw InvalidArgument("synth_mixing must be random or identity_padded, got \"" + std::string(v) + "\"");
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  auto path = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    return p.is_absolute() ? p : base_dir / p;
  };
  bool have_fraction = false, have_count = false;

  using Setter = std::function<void(std::string_view)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"source_cube", [&](auto v) { cfg.source_cube = path(v); }},
      {"source_labels", [&](auto v) { cfg.source_labels = path(v); }},
      {"target_cube", [&](auto v) { cfg.target_cube = path(v); }},
      {"target_labels", [&](auto v) { cfg.target_labels = path(v); }},
      {"source_training_map", [&](auto v) { cfg.source_training_map = path(v); }},
      {"target_training_map", [&](auto v) { cfg.target_training_map = path(v); }},
      {"source_kmeans_bands", [&](auto v) { cfg.source_kmeans_bands = detail::parse_int<int>("source_kmeans_bands", v); }},
      {"per_class_source", [&](auto v) { cfg.per_class_source = detail::parse_int<std::size_t>("per_class_source", v); }},
      {"per_class_target", [&](auto v) { cfg.per_class_target = detail::parse_int<std::size_t>("per_class_target", v); }},
      {"test_fraction",
       [&](auto v) {
         cfg.test_size = TestFraction{detail::parse_double("test_fraction", v)};
         have_fraction = true;
       }},
      {"test_count",
       [&](auto v) {
         cfg.test_size = TestCount{detail::parse_int<std::size_t>("test_count", v)};
         have_count = true;
       }},
      {"beta", [&](auto v) { cfg.params.beta = detail::parse_double("beta", v); }},
      {"gamma", [&](auto v) { cfg.params.gamma = detail::parse_double("gamma", v); }},
      {"rho_threshold", [&](auto v) { cfg.params.rho_threshold = detail::parse_double("rho_threshold", v); }},
      {"query_p", [&](auto v) { cfg.params.query_p = detail::parse_int<std::size_t>("query_p", v); }},
      {"conv_fraction", [&](auto v) { cfg.params.conv_fraction = detail::parse_double("conv_fraction", v); }},
      {"max_iterations", [&](auto v) { cfg.params.max_iterations = detail::parse_int<int>("max_iterations", v); }},
      {"c_grid", [&](auto v) { cfg.params.c_grid = detail::parse_list("c_grid", v); }},
      {"folds", [&](auto v) { cfg.params.folds = detail::parse_int<int>("folds", v); }},
      {"rng_seed", [&](auto v) { cfg.params.rng_seed = detail::parse_int<std::uint64_t>("rng_seed", v); }},
      {"solver", [&](auto v) { cfg.params.solver.kind = detail::parse_solver(v); }},
      {"synth_classes", [&](auto v) { cfg.synth.classes = detail::parse_int<int>("synth_classes", v); }},
      {"synth_width", [&](auto v) { cfg.synth.width = detail::parse_int<std::size_t>("synth_width", v); }},
      {"synth_height", [&](auto v) { cfg.synth.height = detail::parse_int<std::size_t>("synth_height", v); }},
      {"synth_sites", [&](auto v) { cfg.synth.sites = detail::parse_int<int>("synth_sites", v); }},
      {"synth_source_bands", [&](auto v) { cfg.synth.source_bands = detail::parse_int<std::size_t>("synth_source_bands", v); }},
      {"synth_target_bands", [&](auto v) { cfg.synth.target_bands = detail::parse_int<std::size_t>("synth_target_bands", v); }},
      {"synth_class_separation", [&](auto v) { cfg.synth.class_separation = detail::parse_double("synth_class_separation", v); }},
      {"synth_brightness_contrast",
       [&](auto v) { cfg.synth.brightness_contrast = detail::parse_double("synth_brightness_contrast", v); }},
      {"synth_class_spread", [&](auto v) { cfg.synth.class_spread = detail::parse_double("synth_class_spread", v); }},
      {"synth_pixel_noise", [&](auto v) { cfg.synth.pixel_noise = detail::parse_double("synth_pixel_noise", v); }},
      {"synth_source_noise", [&](auto v) { cfg.synth.source_noise = detail::parse_double("synth_source_noise", v); }},
      {"synth_mixing", [&](auto v) { cfg.synth.mixing = detail::parse_mixing(v); }},
      {"synth_layout_seed", [&](auto v) { cfg.synth.layout_seed = detail::parse_int<std::uint64_t>("synth_layout_seed", v); }},
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::trim(s.substr(0, eq));
    const auto value = detail::trim(s.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key \"" + std::string(key) + "\"");
    if (value.empty())
      throw InvalidArgument("config line " + std::to_string(line_no) + ": empty value for " + std::string(key));
    it->second(value);
  }
  if (have_fraction && have_count) throw InvalidArgument("set either test_fraction or test_count, not both");

  const bool files = cfg.target_cube || cfg.target_labels || cfg.source_cube || cfg.source_labels;
  if (files && !(cfg.target_cube && cfg.target_labels && cfg.source_cube && cfg.source_labels))
    throw InvalidArgument("source_cube, source_labels, target_cube and target_labels must be given together");
  if (cfg.source_kmeans_bands < 0) throw InvalidArgument("source_kmeans_bands must be >= 0");
  cfg.params.validate();
  if (cfg.synthetic()) cfg.synth.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

inline nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  if (synthetic()) {
    j["dataset"] = "synthetic";
    j["synth"] = {{"classes", synth.classes},
                  {"width", synth.width},
                  {"height", synth.height},
                  {"sites", synth.sites},
                  {"source_bands", synth.source_bands},
                  {"target_bands", synth.target_bands},
                  {"class_separation", synth.class_separation},
                  {"brightness_contrast", synth.brightness_contrast},
                  {"class_spread", synth.class_spread},
                  {"pixel_noise", synth.pixel_noise},
                  {"source_noise", synth.source_noise},
                  {"mixing", synth.mixing == Mixing::Random ? "random" : "identity_padded"},
                  {"layout_seed", synth.layout_seed}};
  } else {
    j["dataset"] = "files";
    j["source_cube"] = source_cube->generic_string();
    j["source_labels"] = source_labels->generic_string();
    j["target_cube"] = target_cube->generic_string();
    j["target_labels"] = target_labels->generic_string();
    if (source_training_map) j["source_training_map"] = source_training_map->generic_string();
    if (target_training_map) j["target_training_map"] = target_training_map->generic_string();
    j["source_kmeans_bands"] = source_kmeans_bands;
  }
  j["per_class_source"] = per_class_source;
  j["per_class_target"] = per_class_target;
  if (const auto* f = std::get_if<TestFraction>(&test_size))
    j["test_fraction"] = f->value;
  else
    j["test_count"] = std::get<TestCount>(test_size).value;
  j["beta"] = params.beta;
  j["gamma"] = params.gamma;
  j["rho_threshold"] = params.rho_threshold;
  j["query_p"] = params.query_p;
  j["conv_fraction"] = params.conv_fraction;
  j["max_iterations"] = params.max_iterations;
  j["c_grid"] = params.c_grid;
  j["folds"] = params.folds;
  j["rng_seed"] = params.rng_seed;
  j["solver"] = detail::solver_name(params.solver.kind);
  return j;
}

}  // namespace cdcl

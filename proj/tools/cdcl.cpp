// Command-line front end: run, baseline, synth, eval, repro.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdcl/config.hpp"
#include "cdcl/dump.hpp"
#include "cdcl/engine.hpp"
#include "cdcl/experiment.hpp"
#include "cdcl/io.hpp"
#include "cdcl/metrics.hpp"
#include "cdcl/sampling.hpp"
#include "cdcl/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cdcl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool dump_probs = false;
  bool dump_projection = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "experiment config (key = value)");
  if (config_required) c->required();
  cmd->add_option("--seed", o.seed, "overrides rng_seed from the config");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
}

ExperimentConfig config_for(const CommonOptions& o) {
  auto cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.params.rng_seed = *o.seed;
  return cfg;
}

std::string fmt4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

std::string metrics_line(const MetricsReport& m) {
  return "OA=" + fmt4(m.oa) + " AA=" + fmt4(m.aa) + " Kappa=" + fmt4(m.kappa);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { detail::write_text(path, j.dump(2) + "\n"); }

void write_metrics_csv(const fs::path& path, const std::vector<std::pair<std::uint64_t, MetricsReport>>& rows) {
  std::ostringstream s;
  s << "trial,seed,oa,aa,kappa\n";
  s << std::setprecision(10);
  for (std::size_t i = 0; i < rows.size(); ++i)
    s << i << ',' << rows[i].first << ',' << rows[i].second.oa << ',' << rows[i].second.aa << ','
      << rows[i].second.kappa << '\n';
  detail::write_text(path, s.str());
}

nlohmann::ordered_json timings_json(const StageTimings& t) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t) j[k] = v;
  return j;
}

int cmd_run(const CommonOptions& o) {
  const auto cfg = config_for(o);
  const auto ex = prepare_experiment(cfg, cfg.params.rng_seed);
  const fs::path out = o.out;
  fs::create_directories(out);

  const auto result = run_cdcl(ex.inputs(), cfg.params);
  const auto metrics = evaluate(result.labels, ex.split.target_test, ex.split.classes);

  save_labels(result.labels, out / "classification.u16");
  save_split(ex.split, out / "split.json");
  {
    std::ostringstream audit;
    for (const auto& a : result.audit) audit << a.to_json().dump() << '\n';
    detail::write_text(out / "audit.jsonl", audit.str());
  }
  nlohmann::ordered_json report;
  report["command"] = "run";
  report["config"] = cfg.to_json();
  report["classes"] = ex.split.classes;
  report["source_bands"] = ex.source.bands();
  report["target_bands"] = ex.target.bands();
  auto hist = nlohmann::ordered_json::array();
  for (const auto& h : result.history) hist.push_back(h.to_json());
  report["history"] = hist;
  report["training_set_size"] = result.training_set.size();
  report["test_pixels"] = ex.split.target_test.size();
  report["metrics"] = metrics.to_json();
  write_json(out / "report.json", report);
  write_json(out / "timing.json", timings_json(result.timings));
  write_metrics_csv(out / "metrics.csv", {{cfg.params.rng_seed, metrics}});
  if (o.dump_probs) save_probabilities(result.probabilities, out / "probabilities.json");
  if (o.dump_projection) save_projection(result.projection, out / "projection.json");

  std::cout << "iterations=" << result.history.size() << " |TS|=" << result.training_set.size() << '\n';
  std::cout << metrics_line(metrics) << '\n';
  return kExitOk;
}

int cmd_baseline(const CommonOptions& o, const std::string& method_name) {
  const auto method = parse_baseline(method_name);
  const auto cfg = config_for(o);
  const auto ex = prepare_experiment(cfg, cfg.params.rng_seed);
  const fs::path out = o.out;
  fs::create_directories(out);

  const auto result = run_baseline(method, ex.inputs(), cfg.params);
  const auto metrics = evaluate(result.labels, ex.split.target_test, ex.split.classes);

  save_labels(result.labels, out / "classification.u16");
  save_split(ex.split, out / "split.json");
  nlohmann::ordered_json report;
  report["command"] = "baseline";
  report["method"] = to_string(method);
  report["config"] = cfg.to_json();
  report["classes"] = ex.split.classes;
  if (result.projection) {
    report["components"] = result.projection->components();
    report["rho"] = std::vector<double>(result.projection->rho.data(),
                                        result.projection->rho.data() + result.projection->rho.size());
  }
  report["test_pixels"] = ex.split.target_test.size();
  report["metrics"] = metrics.to_json();
  write_json(out / "report.json", report);
  write_metrics_csv(out / "metrics.csv", {{cfg.params.rng_seed, metrics}});
  if (o.dump_probs) save_probabilities(result.probabilities, out / "probabilities.json");
  if (o.dump_projection && result.projection) save_projection(*result.projection, out / "projection.json");

  std::cout << to_string(method) << ' ' << metrics_line(metrics) << '\n';
  return kExitOk;
}

int cmd_synth(const CommonOptions& o) {
  const auto cfg = config_for(o);
  const auto ds = generate_synthetic(cfg.synth, cfg.params.rng_seed);
  const fs::path out = o.out;
  fs::create_directories(out);
  save_cube(ds.source.cube, out / "source.json");
  save_labels(ds.source.labels, out / "source_labels.u16");
  save_cube(ds.target.cube, out / "target.json");
  save_labels(ds.target.labels, out / "target_labels.u16");

  // A config that runs the experiment on the files just written.
  std::ostringstream c;
  c << "source_cube = source.json\n"
    << "source_labels = source_labels.u16\n"
    << "target_cube = target.json\n"
    << "target_labels = target_labels.u16\n"
    << "per_class_source = " << cfg.per_class_source << '\n'
    << "per_class_target = " << cfg.per_class_target << '\n'
    << "rng_seed = " << cfg.params.rng_seed << '\n';
  detail::write_text(out / "experiment.cfg", c.str());
  std::cout << "wrote " << ds.source.cube.width() << 'x' << ds.source.cube.height() << " source ("
            << ds.source.cube.bands() << " bands) and target (" << ds.target.cube.bands() << " bands) to "
            << out.string() << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& truth_path, const std::string& pred_path, int classes, const std::string& out) {
  const auto truth = load_labels_flat(truth_path);
  const auto pred = load_labels_flat(pred_path);
  if (truth.pixels() != pred.pixels())
    throw DataError("label files differ in length (" + std::to_string(truth.pixels()) + " vs " +
                    std::to_string(pred.pixels()) + ")");
  std::vector<int> t, p;
  for (PixelIndex i = 0; i < truth.pixels(); ++i) {
    if (truth[i] == 0) continue;
    t.push_back(truth[i]);
    p.push_back(pred[i]);
  }
  if (t.empty()) throw DataError("ground truth has no labeled pixels");
  if (classes <= 0) classes = std::max(truth.max_label(), pred.max_label());
  for (int v : p)
    if (v < 1 || v > classes) throw DataError("prediction has label " + std::to_string(v) + " outside 1.." + std::to_string(classes));
  const auto m = compute_metrics(t, p, classes);
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(fs::path(out) / "metrics.json", m.to_json());
  }
  std::cout << metrics_line(m) << '\n';
  return kExitOk;
}

int cmd_repro(const CommonOptions& o, const std::string& case_name, std::optional<std::size_t> ts,
              std::optional<std::size_t> tt, int trials) {
  const auto& rc = find_repro_case(case_name);
  auto cfg = config_for(o);
  std::cout << "[data-dependent] published-table reproduction needs the real datasets named in the config\n";
  if (cfg.synthetic())
    throw InvalidArgument("repro needs source/target cube and label paths in the config");
  cfg.per_class_source = ts.value_or(rc.default_sizes.first);
  cfg.per_class_target = tt.value_or(rc.default_sizes.second);
  cfg.test_size = TestFraction{rc.test_fraction};
  if (cfg.source_kmeans_bands == 0) cfg.source_kmeans_bands = rc.source_kmeans_bands;
  if (trials < 1) throw InvalidArgument("trials must be >= 1");

  const fs::path out = o.out;
  fs::create_directories(out);
  std::vector<std::pair<std::uint64_t, MetricsReport>> rows;
  std::vector<double> oa, aa, kappa;
  for (int trial = 0; trial < trials; ++trial) {
    const auto seed = cfg.params.rng_seed + static_cast<std::uint64_t>(trial);
    auto params = cfg.params;
    params.rng_seed = seed;
    const auto ex = prepare_experiment(cfg, seed);
    const auto result = run_cdcl(ex.inputs(), params);
    const auto m = evaluate(result.labels, ex.split.target_test, ex.split.classes);
    std::cerr << "trial " << trial << " seed " << seed << ' ' << metrics_line(m) << '\n';
    rows.emplace_back(seed, m);
    oa.push_back(100.0 * m.oa);
    aa.push_back(100.0 * m.aa);
    kappa.push_back(100.0 * m.kappa);
  }
  write_metrics_csv(out / "metrics.csv", rows);

  const auto s_oa = summarize(oa), s_aa = summarize(aa), s_k = summarize(kappa);
  auto pm = [](const TrialSummary& s) {
    std::ostringstream x;
    x << std::fixed << std::setprecision(2) << s.mean << '/' << s.stddev;
    return x.str();
  };
  const auto label = std::to_string(cfg.per_class_source) + "/" + std::to_string(cfg.per_class_target);
  std::cout << case_name << ' ' << label << "  CDCL  OA " << pm(s_oa) << "  AA " << pm(s_aa) << "  Kappa "
            << pm(s_k) << "  (" << trials << " trials)\n";

  nlohmann::ordered_json summary;
  summary["case"] = case_name;
  summary["setting"] = label;
  summary["trials"] = trials;
  summary["oa_mean"] = s_oa.mean;
  summary["oa_std"] = s_oa.stddev;
  summary["aa_mean"] = s_aa.mean;
  summary["kappa_mean"] = s_k.mean;
  const auto target = rc.target_for(cfg.per_class_source, cfg.per_class_target);
  if (target) {
    const bool ok = std::abs(s_oa.mean - *target) <= kReproTolerance;
    std::cout << "[data-dependent] reported OA " << std::fixed << std::setprecision(2) << *target << ", tolerance +/-"
              << kReproTolerance << ": " << (ok ? "PASS" : "FAIL") << '\n';
    summary["reported_oa"] = *target;
    summary["within_tolerance"] = ok;
  } else {
    std::cout << "[data-dependent] no reported value for this setting\n";
  }
  write_json(out / "repro.json", summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain collaborative learning for hyperspectral classification"};
  app.require_subcommand(1);

  CommonOptions run_opts, base_opts, synth_opts, repro_opts;
  auto* run = app.add_subcommand("run", "run the full iterative method on a config");
  add_common(run, run_opts, true);
  run->add_flag("--dump-probs", run_opts.dump_probs, "write the final probability map");
  run->add_flag("--dump-projection", run_opts.dump_projection, "write the last correlation subspace");

  std::string method;
  auto* base = app.add_subcommand("baseline", "run one baseline on a config");
  add_common(base, base_opts, true);
  base->add_option("--method", method, "na, cca, ccca or erw")->required()->check(
      CLI::IsMember({"na", "cca", "ccca", "erw"}, CLI::ignore_case));
  base->add_flag("--dump-probs", base_opts.dump_probs, "write the probability map");
  base->add_flag("--dump-projection", base_opts.dump_projection, "write the correlation subspace (cca/ccca)");

  auto* synth = app.add_subcommand("synth", "write a synthetic two-domain dataset");
  add_common(synth, synth_opts, false);

  std::string truth_path, pred_path, eval_out;
  int eval_classes = 0;
  auto* eval = app.add_subcommand("eval", "metrics of a predicted label file against ground truth");
  eval->add_option("truth", truth_path, "ground-truth labels (u16le, 0 = unlabeled)")->required();
  eval->add_option("prediction", pred_path, "predicted labels (u16le)")->required();
  eval->add_option("--classes", eval_classes, "class count (default: largest label seen)");
  eval->add_option("--out", eval_out, "also write metrics.json here");

  std::string repro_case;
  std::optional<std::size_t> repro_ts, repro_tt;
  int repro_trials = kReproTrials;
  auto* repro = app.add_subcommand("repro", "published-table harness on user-supplied datasets");
  add_common(repro, repro_opts, true);
  repro->add_option("--case", repro_case, "univ_center, center_univ, salinas or indian")->required();
  repro->add_option("--ts", repro_ts, "source labels per class");
  repro->add_option("--tt", repro_tt, "target labels per class");
  repro->add_option("--trials", repro_trials, "number of trials (seeds seed .. seed+trials-1)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto parsed = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == run) return cmd_run(run_opts);
    if (active == base) return cmd_baseline(base_opts, method);
    if (active == synth) return cmd_synth(synth_opts);
    if (active == eval) return cmd_eval(truth_path, pred_path, eval_classes, eval_out);
    if (active == repro) return cmd_repro(repro_opts, repro_case, repro_ts, repro_tt, repro_trials);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

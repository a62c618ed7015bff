#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"

namespace cdcl {

struct MetricsReport {
  std::vector<std::vector<long>> confusion;  // rows = truth, cols = prediction
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the truth

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["oa"] = oa;
    j["aa"] = aa;
    j["kappa"] = kappa;
    auto pca = nlohmann::ordered_json::array();
    for (double a : per_class_accuracy) pca.push_back(std::isnan(a) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(a));
    j["per_class_accuracy"] = pca;
    j["confusion"] = confusion;
    j["aa_note"] = "classes absent from the ground truth are excluded from AA";
    return j;
  }
};

/// OA, AA (mean recall over classes present in the truth) and Cohen's kappa.
inline MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) throw InvalidArgument("truth and prediction lengths differ");
  if (truth.empty()) throw InvalidArgument("no samples to evaluate");
  if (classes < 1) throw InvalidArgument("class count must be positive");

  const auto C = static_cast<std::size_t>(classes);
  MetricsReport r;
  r.confusion.assign(C, std::vector<long>(C, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > classes || predicted[i] < 1 || predicted[i] > classes)
      throw InvalidArgument("label outside 1.." + std::to_string(classes) + " at sample " + std::to_string(i));
    ++r.confusion[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
  }

  const auto n = static_cast<double>(truth.size());
  std::vector<double> row(C, 0.0), col(C, 0.0);
  double diag = 0.0;
  for (std::size_t a = 0; a < C; ++a) {
    for (std::size_t b = 0; b < C; ++b) {
      row[a] += static_cast<double>(r.confusion[a][b]);
      col[b] += static_cast<double>(r.confusion[a][b]);
    }
    diag += static_cast<double>(r.confusion[a][a]);
  }
  r.oa = diag / n;

  double recall_sum = 0.0;
  int present = 0;
  r.per_class_accuracy.assign(C, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t a = 0; a < C; ++a) {
    if (row[a] == 0.0) continue;
    r.per_class_accuracy[a] = static_cast<double>(r.confusion[a][a]) / row[a];
    recall_sum += r.per_class_accuracy[a];
    ++present;
  }
  r.aa = recall_sum / present;

  double pe = 0.0;
  for (std::size_t a = 0; a < C; ++a) pe += (row[a] / n) * (col[a] / n);
  r.kappa = pe < 1.0 ? (r.oa - pe) / (1.0 - pe) : 1.0;
  return r;
}

/// Metrics of `predicted` on the given ground-truth pixels.
inline MetricsReport evaluate(const LabelMap& predicted, std::span<const LabeledPixel> truth, int classes) {
  std::vector<int> t, p;
  t.reserve(truth.size());
  p.reserve(truth.size());
  for (const auto& e : truth) {
    t.push_back(e.label);
    p.push_back(predicted[e.pixel]);
  }
  return compute_metrics(t, p, classes);
}

}  // namespace cdcl

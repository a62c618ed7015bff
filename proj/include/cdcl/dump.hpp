#pragma once

// Debug dumps: a JSON header next to a raw f32le payload.
//
//   probabilities  pixel-major, then class
//   projection     source basis then target basis, each column-major
//   model          weights row-major, classes x (features + 1), bias last

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdcl/classifier.hpp"
#include "cdcl/error.hpp"
#include "cdcl/io.hpp"
#include "cdcl/rw_graph.hpp"
#include "cdcl/subspace.hpp"

namespace cdcl {

namespace detail {

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline void append_col_major(std::vector<float>& out, const Eigen::MatrixXd& M) {
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    for (Eigen::Index i = 0; i < M.rows(); ++i) out.push_back(static_cast<float>(M(i, j)));
}

inline std::string payload_name(const fs::path& header_path) { return header_path.stem().string() + ".f32"; }

}  // namespace detail

inline void save_probabilities(const ProbabilityMap& pm, const fs::path& header_path) {
  nlohmann::ordered_json h;
  h["width"] = pm.width();
  h["height"] = pm.height();
  h["classes"] = pm.classes();
  h["dtype"] = "f32le";
  h["layout"] = "pixel_major";
  h["data"] = detail::payload_name(header_path);
  std::vector<float> raw(pm.data().begin(), pm.data().end());
  detail::write_text(header_path, h.dump(2) + "\n");
  detail::write_f32_payload(header_path.parent_path() / detail::payload_name(header_path), raw);
}

inline ProbabilityMap load_probabilities(const fs::path& header_path) {
  const auto h = detail::read_json(header_path);
  const auto width = detail::header_size(h, "width", header_path);
  const auto height = detail::header_size(h, "height", header_path);
  const auto classes = detail::header_size(h, "classes", header_path);
  if (detail::header_string(h, "dtype", header_path) != "f32le" ||
      detail::header_string(h, "layout", header_path) != "pixel_major")
    throw LoadError("unsupported probability dump layout in " + header_path.string());
  const auto data = detail::header_string(h, "data", header_path);
  const auto raw = detail::read_file_bytes(header_path.parent_path() / data);
  if (raw.size() != width * height * classes * sizeof(float))
    throw LoadError("size mismatch: " + data + " does not match the declared dimensions");
  const auto values = detail::decode_le<float>(raw);
  ProbabilityMap pm(width, height, static_cast<int>(classes));
  for (std::size_t p = 0; p < width * height; ++p)
    for (std::size_t c = 0; c < classes; ++c) pm.row(p)[c] = values[p * classes + c];
  return pm;
}

inline void save_projection(const ProjectionPair& pair, const fs::path& header_path) {
  nlohmann::ordered_json h;
  h["source_dim"] = pair.source_basis.rows();
  h["target_dim"] = pair.target_basis.rows();
  h["components"] = pair.components();
  h["rho"] = detail::to_vector(pair.rho);
  h["source_mean"] = detail::to_vector(pair.source_mean);
  h["target_mean"] = detail::to_vector(pair.target_mean);
  h["dtype"] = "f32le";
  h["layout"] = "col_major";
  h["data"] = detail::payload_name(header_path);
  std::vector<float> raw;
  detail::append_col_major(raw, pair.source_basis);
  detail::append_col_major(raw, pair.target_basis);
  detail::write_text(header_path, h.dump(2) + "\n");
  detail::write_f32_payload(header_path.parent_path() / detail::payload_name(header_path), raw);
}

inline void save_model(const LinearModel& model, const fs::path& header_path) {
  nlohmann::ordered_json h;
  h["classes"] = model.class_count;
  h["feature_dim"] = model.feature_dim;
  h["chosen_C"] = model.chosen_c;
  h["feature_mean"] = detail::to_vector(model.feature_mean);
  h["feature_scale"] = detail::to_vector(model.feature_scale);
  h["dtype"] = "f32le";
  h["layout"] = "row_major";
  h["data"] = detail::payload_name(header_path);
  std::vector<float> raw;
  raw.reserve(static_cast<std::size_t>(model.weights.size()));
  for (Eigen::Index i = 0; i < model.weights.rows(); ++i)
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j) raw.push_back(static_cast<float>(model.weights(i, j)));
  detail::write_text(header_path, h.dump(2) + "\n");
  detail::write_f32_payload(header_path.parent_path() / detail::payload_name(header_path), raw);
}

}  // namespace cdcl

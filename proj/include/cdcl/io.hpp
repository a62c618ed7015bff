#pragma once

// On-disk formats.
//
// Cube: a UTF-8 JSON header
//   {"width":W,"height":H,"bands":B,"dtype":"f32le","layout":"bsq","data":"<raw path>"}
// where the raw path is relative to the header's directory and holds W*H*B
// little-endian IEEE-754 floats, band after band, each band row-major.
//
// Labels: W*H little-endian uint16 values, row-major, 0 = unlabeled.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdcl/cube.hpp"
#include "cdcl/error.hpp"

namespace cdcl {

namespace fs = std::filesystem;

namespace detail {

template <typename T>
T byteswap_value(T v) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

template <typename T>
std::vector<T> decode_le(const std::vector<char>& raw) {
  std::vector<T> out(raw.size() / sizeof(T));
  std::memcpy(out.data(), raw.data(), out.size() * sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : out) v = byteswap_value(v);
  }
  return out;
}

template <typename T>
void write_le(std::ostream& os, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(T)));
  } else {
    for (T v : values) {
      T s = byteswap_value(v);
      os.write(reinterpret_cast<const char*>(&s), sizeof(T));
    }
  }
}

inline std::vector<char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size)))
    throw LoadError("short read on " + path.string());
  return bytes;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

inline std::size_t header_size(const nlohmann::json& h, const char* key, const fs::path& path) {
  if (!h.contains(key) || !h[key].is_number_unsigned())
    throw LoadError("header " + path.string() + ": missing or invalid \"" + key + "\"");
  return h[key].get<std::size_t>();
}

inline std::string header_string(const nlohmann::json& h, const char* key, const fs::path& path) {
  if (!h.contains(key) || !h[key].is_string())
    throw LoadError("header " + path.string() + ": missing or invalid \"" + key + "\"");
  return h[key].get<std::string>();
}

/// Writes `floats` as raw f32le next to a JSON header.
inline void write_f32_payload(const fs::path& path, std::span<const float> floats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_le<float>(out, floats);
}

}  // namespace detail

inline HsiCube load_cube(const fs::path& header_path) {
  const auto h = detail::read_json(header_path);
  if (!h.is_object()) throw LoadError("header " + header_path.string() + " is not an object");
  const auto width = detail::header_size(h, "width", header_path);
  const auto height = detail::header_size(h, "height", header_path);
  const auto bands = detail::header_size(h, "bands", header_path);
  const auto dtype = detail::header_string(h, "dtype", header_path);
  const auto layout = detail::header_string(h, "layout", header_path);
  const auto data = detail::header_string(h, "data", header_path);
  if (dtype != "f32le") throw LoadError("unsupported dtype \"" + dtype + "\"");
  if (layout != "bsq") throw LoadError("unsupported layout \"" + layout + "\"");
  if (width * height == 0 || bands == 0) throw LoadError("cube dimensions must be positive");

  const auto raw = detail::read_file_bytes(header_path.parent_path() / data);
  const std::size_t expected = width * height * bands * sizeof(float);
  if (raw.size() != expected)
    throw LoadError("size mismatch: " + data + " has " + std::to_string(raw.size()) +
                    " bytes, header declares " + std::to_string(expected));
  auto values = detail::decode_le<float>(raw);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw LoadError("non-finite value at index " + std::to_string(i) + " in " + data);
  }
  return HsiCube(width, height, bands, std::move(values));
}

/// Writes the header at `header_path` and the payload next to it.
inline void save_cube(const HsiCube& cube, const fs::path& header_path) {
  const auto data_name = header_path.stem().string() + ".f32";
  nlohmann::ordered_json h;
  h["width"] = cube.width();
  h["height"] = cube.height();
  h["bands"] = cube.bands();
  h["dtype"] = "f32le";
  h["layout"] = "bsq";
  h["data"] = data_name;
  detail::write_text(header_path, h.dump(2) + "\n");
  detail::write_f32_payload(header_path.parent_path() / data_name, cube.values());
}

inline LabelMap load_labels(const fs::path& path, std::size_t width, std::size_t height) {
  const auto raw = detail::read_file_bytes(path);
  if (raw.size() != width * height * sizeof(std::uint16_t))
    throw LoadError("size mismatch: " + path.string() + " has " + std::to_string(raw.size()) +
                    " bytes, expected " + std::to_string(width * height * 2));
  return LabelMap(width, height, detail::decode_le<std::uint16_t>(raw));
}

/// Reads a bare label file whose dimensions are unknown; returned as a 1-row map.
inline LabelMap load_labels_flat(const fs::path& path) {
  const auto raw = detail::read_file_bytes(path);
  if (raw.size() % 2 != 0) throw LoadError(path.string() + " has an odd byte count");
  auto labels = detail::decode_le<std::uint16_t>(raw);
  const auto n = labels.size();
  return LabelMap(n, 1, std::move(labels));
}

inline void save_labels(const LabelMap& labels, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  detail::write_le<std::uint16_t>(out, labels.labels());
}

}  // namespace cdcl

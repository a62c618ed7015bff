#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdcl/error.hpp"

namespace cdcl {

using PixelIndex = std::size_t;
using ClassLabel = int;

/// Linear pixel index used everywhere: row * width + col.
constexpr PixelIndex pixel_index(std::size_t row, std::size_t col, std::size_t width) {
  return row * width + col;
}

/// A width x height x bands reflectance raster, band-sequential storage.
///
/// Values are kept as 32-bit floats (the on-disk type); computations widen
/// to double on access.
class HsiCube {
 public:
  HsiCube() = default;

  HsiCube(std::size_t width, std::size_t height, std::size_t bands, std::vector<float> values)
      : width_(width), height_(height), bands_(bands), values_(std::move(values)) {
    if (width_ * height_ == 0) throw InvalidArgument("cube must contain at least one pixel");
    if (bands_ == 0) throw InvalidArgument("cube must have at least one band");
    if (values_.size() != width_ * height_ * bands_)
      throw InvalidArgument("cube payload has " + std::to_string(values_.size()) +
                            " values, expected " + std::to_string(width_ * height_ * bands_));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw DataError("non-finite cube value at index " + std::to_string(i));
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t bands() const { return bands_; }
  std::size_t pixels() const { return width_ * height_; }

  std::span<const float> values() const { return values_; }
  std::span<const float> band(std::size_t b) const {
    return std::span<const float>(values_).subspan(b * pixels(), pixels());
  }

  double at(std::size_t b, PixelIndex p) const { return values_[b * pixels() + p]; }

  Eigen::VectorXd spectrum(PixelIndex p) const {
    Eigen::VectorXd x(bands_);
    for (std::size_t b = 0; b < bands_; ++b) x[b] = at(b, p);
    return x;
  }

  /// Rows are the spectra of `pixels`, in order.
  Eigen::MatrixXd gather(std::span<const PixelIndex> pixels) const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pixels.size()), static_cast<Eigen::Index>(bands_));
    for (std::size_t b = 0; b < bands_; ++b) {
      const float* row = values_.data() + b * this->pixels();
      for (std::size_t i = 0; i < pixels.size(); ++i) X(i, b) = row[pixels[i]];
    }
    return X;
  }

  /// Spectra of the contiguous pixel range [first, first + count).
  Eigen::MatrixXd gather_range(PixelIndex first, std::size_t count) const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(bands_));
    for (std::size_t b = 0; b < bands_; ++b) {
      const float* row = values_.data() + b * pixels() + first;
      for (std::size_t i = 0; i < count; ++i) X(i, b) = row[i];
    }
    return X;
  }

  friend bool operator==(const HsiCube&, const HsiCube&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t bands_ = 0;
  std::vector<float> values_;
};

/// Per-pixel class labels; 0 marks an unlabeled pixel, 1..C are classes.
class LabelMap {
 public:
  LabelMap() = default;

  LabelMap(std::size_t width, std::size_t height, std::vector<std::uint16_t> labels)
      : width_(width), height_(height), labels_(std::move(labels)) {
    if (labels_.size() != width_ * height_)
      throw InvalidArgument("label map has " + std::to_string(labels_.size()) +
                            " entries, expected " + std::to_string(width_ * height_));
  }

  LabelMap(std::size_t width, std::size_t height)
      : LabelMap(width, height, std::vector<std::uint16_t>(width * height, 0)) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixels() const { return labels_.size(); }

  ClassLabel operator[](PixelIndex p) const { return labels_[p]; }
  void set(PixelIndex p, ClassLabel label) { labels_[p] = static_cast<std::uint16_t>(label); }

  std::span<const std::uint16_t> labels() const { return labels_; }

  ClassLabel max_label() const {
    ClassLabel m = 0;
    for (auto l : labels_) m = std::max<ClassLabel>(m, l);
    return m;
  }

  /// Throws when any label exceeds `classes`.
  void check_classes(int classes) const {
    for (std::size_t p = 0; p < labels_.size(); ++p) {
      if (labels_[p] > classes)
        throw DataError("label " + std::to_string(labels_[p]) + " at pixel " + std::to_string(p) +
                        " exceeds class count " + std::to_string(classes));
    }
  }

  bool matches(const HsiCube& cube) const {
    return width_ == cube.width() && height_ == cube.height();
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint16_t> labels_;
};

/// A labeled pixel.
struct LabeledPixel {
  PixelIndex pixel = 0;
  ClassLabel label = 0;

  friend bool operator==(const LabeledPixel&, const LabeledPixel&) = default;
};

}  // namespace cdcl

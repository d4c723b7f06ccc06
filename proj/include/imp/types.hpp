#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imp/error.hpp"

namespace imp {

/// Axis-aligned box in continuous image-pixel coordinates, origin at the
/// top-left image corner. Requires x1 > x0 and y1 > y0.
struct BBox {
  float x0 = 0.f;
  float y0 = 0.f;
  float x1 = 0.f;
  float y1 = 0.f;

  float width() const { return x1 - x0; }
  float height() const { return y1 - y0; }
  bool operator==(const BBox&) const = default;
};

/// Row-major h x w grid of mask probabilities in [0,1].
template <class T>
struct BasicMask {
  int h = 0;
  int w = 0;
  std::vector<T> values;

  BasicMask() = default;
  BasicMask(int rows, int cols, T fill = T(0))
      : h(rows), w(cols), values(static_cast<std::size_t>(rows) * cols, fill) {}

  T& at(int r, int c) { return values[static_cast<std::size_t>(r) * w + c]; }
  T at(int r, int c) const { return values[static_cast<std::size_t>(r) * w + c]; }
  const T* row(int r) const { return values.data() + static_cast<std::size_t>(r) * w; }
  bool operator==(const BasicMask&) const = default;
};

/// One instance prediction. `index` is the ordinal within its image and is
/// the key used for max tie-breaking, so it must survive any reordering.
template <class T>
struct BasicDetection {
  int class_id = 0;
  T score = T(0);
  BBox bbox;
  BasicMask<T> mask;
  int index = 0;

  bool operator==(const BasicDetection&) const = default;
};

using InstanceMask = BasicMask<float>;
using Detection = BasicDetection<float>;

struct CanvasSpec {
  int num_classes = 1;
  int height = 1;  // image pixels
  int width = 1;
  int scale = 4;   // one canvas cell covers scale x scale image pixels

  int rows() const { return (height + scale - 1) / scale; }
  int cols() const { return (width + scale - 1) / scale; }
  bool operator==(const CanvasSpec&) const = default;
};

void validate_spec(const CanvasSpec& spec);

/// Dense channels x rows x cols tensor, row-major within a channel.
template <class T>
struct Tensor3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int r, int w, T fill = T(0))
      : channels(c), rows(r), cols(w),
        data(static_cast<std::size_t>(c) * r * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t offset(int c, int y, int x) const {
    return static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * cols + x;
  }
  T& at(int c, int y, int x) { return data[offset(c, y, x)]; }
  T at(int c, int y, int x) const { return data[offset(c, y, x)]; }
  std::span<T> channel(int c) { return {data.data() + c * plane(), plane()}; }
  std::span<const T> channel(int c) const { return {data.data() + c * plane(), plane()}; }
  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
  bool operator==(const Tensor3&) const = default;
};

/// C x Hc x Wc fused projection canvas. Zero-initialized on construction.
template <class T>
struct BasicCanvas {
  CanvasSpec spec;
  Tensor3<T> values;

  BasicCanvas() = default;
  explicit BasicCanvas(const CanvasSpec& s)
      : spec(s), values(s.num_classes, s.rows(), s.cols()) {}

  T at(int c, int y, int x) const { return values.at(c, y, x); }
  bool operator==(const BasicCanvas&) const = default;
};

using Canvas = BasicCanvas<float>;

inline constexpr std::uint16_t kDefaultIgnore = 255;

/// Label conventions: class ids are [0, num_classes), BACKGROUND is
/// num_classes, and IGNORE is a configured sentinel.
struct LabelSpace {
  int num_classes = 1;
  std::uint16_t ignore = kDefaultIgnore;

  std::uint16_t background() const { return static_cast<std::uint16_t>(num_classes); }
  bool valid(std::uint16_t v) const { return v <= num_classes || v == ignore; }
  bool operator==(const LabelSpace&) const = default;
};

void validate_label_space(const LabelSpace& space);

struct LabelMap {
  int rows = 0;
  int cols = 0;
  LabelSpace space;
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(int r, int c, LabelSpace s, std::uint16_t fill)
      : rows(r), cols(c), space(s), labels(static_cast<std::size_t>(r) * c, fill) {}

  std::uint16_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * cols + x]; }
  std::uint16_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * cols + x]; }
  std::size_t size() const { return labels.size(); }
  bool operator==(const LabelMap&) const = default;
};

/// Throws imp::Error naming the offending field when a detection is not
/// projectable under `spec`. Boxes may extend past the image.
template <class T>
void validate_detection(const BasicDetection<T>& d, const CanvasSpec& spec);

/// Per-detection validation plus the requirement that `index` values are
/// unique and cover 0..n-1.
template <class T>
void validate_detections(std::span<const BasicDetection<T>> dets, const CanvasSpec& spec);

}  // namespace imp

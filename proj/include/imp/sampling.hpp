#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "imp/types.hpp"

namespace imp {

/// Bilinear sample along one axis: two (possibly equal) clamped mask indices
/// and their weights, which sum to one.
struct AxisSample {
  int lo = 0;
  int hi = 0;
  float w_lo = 1.f;
  float w_hi = 0.f;
  bool operator==(const AxisSample&) const = default;
};

/// Maps canvas cell `cell` along one axis into mask coordinates.
///
/// The cell center sits at (cell + 0.5) * scale image pixels. Its position
/// t inside [box_lo, box_hi) is normalized to [0,1); anything outside that
/// half-open range yields nullopt. The continuous mask coordinate is
/// t * extent - 0.5 (ROI-Align style centers). Corners past the mask edge
/// are clamped and the fractional weight is dropped so the whole weight
/// lands on the edge sample.
///
/// All arithmetic is float and the expression order is part of the
/// contract: kernels and oracles must agree bit for bit.
inline std::optional<AxisSample> sample_axis(int cell, int scale, float box_lo,
                                             float box_hi, int extent) {
  const float center = (static_cast<float>(cell) + 0.5f) * static_cast<float>(scale);
  const float t = (center - box_lo) / (box_hi - box_lo);
  if (!(t >= 0.f && t < 1.f)) return std::nullopt;
  const float u = t * static_cast<float>(extent) - 0.5f;
  const float base = std::floor(u);
  const int i = static_cast<int>(base);
  AxisSample s;
  if (i < 0) {
    s.lo = s.hi = 0;
  } else if (i >= extent - 1) {
    s.lo = s.hi = extent - 1;
  } else {
    const float frac = u - base;
    s.lo = i;
    s.hi = i + 1;
    s.w_lo = 1.f - frac;
    s.w_hi = frac;
  }
  return s;
}

/// pre_map result for one canvas cell: continuous mask coordinates plus the
/// separable bilinear sample.
struct SamplePoint {
  float u = 0.f;  // column coordinate in mask cells
  float v = 0.f;  // row coordinate in mask cells
  AxisSample col;
  AxisSample row;

  /// Corner weights in the order (lo,lo) (lo,hi) (hi,lo) (hi,hi), (row,col).
  std::array<float, 4> weights() const {
    return {row.w_lo * col.w_lo, row.w_lo * col.w_hi, row.w_hi * col.w_lo,
            row.w_hi * col.w_hi};
  }
};

std::optional<SamplePoint> pre_map(int cell_y, int cell_x, const BBox& box, int mask_h,
                                   int mask_w, const CanvasSpec& spec);

/// Bilinear mask value at a sample point. Rows are blended horizontally
/// first, then vertically; the projection kernels use the same order.
template <class T>
T sample_value(const BasicMask<T>& mask, const AxisSample& row, const AxisSample& col) {
  const T* top = mask.row(row.lo);
  const T* bot = mask.row(row.hi);
  const T wx0 = static_cast<T>(col.w_lo);
  const T wx1 = static_cast<T>(col.w_hi);
  const T t = wx0 * top[col.lo] + wx1 * top[col.hi];
  const T b = wx0 * bot[col.lo] + wx1 * bot[col.hi];
  return static_cast<T>(row.w_lo) * t + static_cast<T>(row.w_hi) * b;
}

template <class T>
T sample_value(const BasicMask<T>& mask, const SamplePoint& p) {
  return sample_value(mask, p.row, p.col);
}

}  // namespace imp

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "imp/metrics.hpp"
#include "imp/types.hpp"

namespace imp {

struct BinaryGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> values;

  BinaryGrid() = default;
  BinaryGrid(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0) {}
  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * cols + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * cols + x]; }
  std::size_t count() const;
};

/// Euclidean distance in pixels to the nearest boundary pixel.
struct DistanceField {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * cols + x]; }
};

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

/// Default Fig.-4-style thresholds, in pixels.
inline constexpr double kBoundaryThresholds[] = {10, 20, 50, 100, 200, 400};

/// A pixel is boundary when a 4-neighbour carries a different label. IGNORE
/// pixels are never boundary and never count as a differing neighbour. The
/// image border is not a boundary.
BinaryGrid boundary_pixels(const LabelMap& gt);

/// Exact Euclidean distance transform (separable lower envelope of
/// parabolas). All distances are +inf when the grid has no set pixel.
DistanceField distance_transform(const BinaryGrid& boundary);

/// Accumulates confusion counts over pixels with dist <= d_max and gt not
/// IGNORE.
void miou_within(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt,
                 const DistanceField& dist, double d_max);

}  // namespace imp

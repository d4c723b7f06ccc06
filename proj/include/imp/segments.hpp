#pragma once

#include <cstdint>
#include <vector>

#include "imp/types.hpp"

namespace imp {

/// One 8-connected component of a single label value.
struct Component {
  std::uint16_t label = 0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive pixel extent
  std::size_t area = 0;
  std::vector<std::uint32_t> pixels;  // flat indices, raster order
};

/// Union-find labelling with 8-connectivity. Components of every label value
/// except `skip_a` / `skip_b` are returned, ordered by label and then by the
/// raster position of their first pixel.
std::vector<Component> connected_components(const LabelMap& labels, std::uint16_t skip_a,
                                            std::uint16_t skip_b);

/// Instance mask resolution; {0, 0} means "native", i.e. the component's own
/// bbox size in pixels.
struct MaskDims {
  int h = 28;
  int w = 28;
  bool native() const { return h == 0 && w == 0; }
};

inline constexpr int kDefaultMinArea = 16;

/// Each connected component of a non-background, non-ignore class becomes a
/// score-1 detection with its tight bbox and the component raster
/// area-averaged down to `dims`. Components smaller than `min_area` pixels
/// are dropped. Indices are assigned in output order.
std::vector<Detection> segments_to_instances(const LabelMap& gt, MaskDims dims = {},
                                             int min_area = kDefaultMinArea);

/// Box-filter resampling of a binary raster (rows x cols, row-major) to
/// out_h x out_w, with exact fractional pixel coverage.
InstanceMask area_average(const std::vector<std::uint8_t>& raster, int rows, int cols,
                          int out_h, int out_w);

}  // namespace imp

#pragma once

#include <span>
#include <vector>

#include "imp/types.hpp"

namespace imp {

inline constexpr float kDefaultTau = 0.5f;

enum class UpsampleMode {
  /// Image pixel (y, x) copies canvas cell (y / scale, x / scale).
  Nearest,
  /// Bilinearly upsample each canvas channel to image resolution, then argmax.
  BilinearCanvas,
};

/// Per cell: lowest class id attaining the channel max if that max exceeds
/// tau, else BACKGROUND. The output uses `ignore` as its IGNORE sentinel.
LabelMap canvas_to_labels(const Canvas& canvas, float tau,
                          std::uint16_t ignore = kDefaultIgnore);

/// Block replication of an Hc x Wc label grid to H x W.
LabelMap upsample_labels(const LabelMap& labels, const CanvasSpec& spec);

/// Fused projection-only segmentation. In Nearest mode this equals
/// upsample_labels(canvas_to_labels(imp_forward(...).canvas, tau), spec).
LabelMap project_to_semantic(std::span<const Detection> detections, const CanvasSpec& spec,
                             float tau = kDefaultTau, UpsampleMode mode = UpsampleMode::Nearest,
                             std::uint16_t ignore = kDefaultIgnore);

inline LabelMap project_to_semantic(const std::vector<Detection>& detections,
                                    const CanvasSpec& spec, float tau = kDefaultTau,
                                    UpsampleMode mode = UpsampleMode::Nearest,
                                    std::uint16_t ignore = kDefaultIgnore) {
  return project_to_semantic(std::span<const Detection>(detections), spec, tau, mode, ignore);
}

/// Bilinear-on-canvas label map at image resolution (cell centers at
/// (i + 0.5) * scale, edge-clamped).
LabelMap upsample_canvas_bilinear(const Canvas& canvas, float tau,
                                  std::uint16_t ignore = kDefaultIgnore);

}  // namespace imp

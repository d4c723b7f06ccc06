#pragma once

#include <vector>

#include "imp/rng.hpp"
#include "imp/types.hpp"

namespace imp {

/// Knobs for seeded random detection sets used by tests, the acceptance
/// suite and the bench command.
struct RandomDetectionOptions {
  int min_mask = 1;
  int max_mask = 8;
  double min_score = 0.0;
  double max_score = 1.0;
  double min_mask_value = 0.0;
  double max_mask_value = 1.0;
  /// Box side range as a fraction of the image side.
  double min_box_fraction = 0.05;
  double max_box_fraction = 0.8;
  /// Allows boxes to hang past the image border.
  bool allow_outside = true;
  /// Draw scores and mask values from a small set so exact ties occur.
  bool quantized = false;
};

template <class T>
std::vector<BasicDetection<T>> random_detections(Rng& rng, const CanvasSpec& spec, int count,
                                                 const RandomDetectionOptions& options = {});

/// Uniform random labels over classes + background, with IGNORE drawn at
/// `ignore_fraction`.
LabelMap random_labelmap(Rng& rng, int rows, int cols, const LabelSpace& space,
                         double ignore_fraction = 0.0);

/// Piecewise-constant label map made of random axis-aligned rectangles
/// painted over each other (gives long boundaries and many components).
LabelMap random_blocky_labelmap(Rng& rng, int rows, int cols, const LabelSpace& space,
                                int rectangles, double ignore_fraction = 0.0);

struct ShapeSceneOptions {
  int min_side = 64;
  int max_side = 160;
  int max_shapes = 6;
  int gap = 8;  // minimum background margin between shapes
};

/// Background map with non-touching filled rectangles and ellipses of
/// random classes; every shape's bbox sides are at least min_side.
LabelMap synthetic_shape_scene(Rng& rng, int rows, int cols, const LabelSpace& space,
                               const ShapeSceneOptions& options = {});

}  // namespace imp

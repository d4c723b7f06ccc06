#include "doctest.h"
#include "imp/rng.hpp"
#include "imp/segments.hpp"
#include "imp/semantic.hpp"
#include "imp/synthetic.hpp"

using namespace imp;

TEST_CASE("segments_to_instances worked examples") {
  const LabelSpace space{3, 255};
  LabelMap empty(32, 32, space, space.background());
  CHECK(segments_to_instances(empty, {28, 28}).empty());

  LabelMap square(32, 32, space, space.background());
  for (int y = 5; y < 13; ++y)
    for (int x = 9; x < 17; ++x) square.at(y, x) = 0;
  auto dets = segments_to_instances(square, {28, 28});
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].class_id == 0);
  CHECK(dets[0].score == 1.f);
  CHECK(dets[0].bbox == BBox{9, 5, 17, 13});
  CHECK(dets[0].mask.h == 28);
  CHECK(dets[0].mask.w == 28);
  for (float v : dets[0].mask.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

  for (int y = 20; y < 28; ++y)
    for (int x = 20; x < 28; ++x) square.at(y, x) = 0;
  dets = segments_to_instances(square, {28, 28});
  REQUIRE(dets.size() == 2);
  CHECK(dets[0].index == 0);
  CHECK(dets[1].index == 1);
  CHECK(dets[1].bbox == BBox{20, 20, 28, 28});
}

TEST_CASE("components use 8-connectivity, skip ignore, honour min_area") {
  const LabelSpace space{2, 255};
  LabelMap lm(10, 10, space, space.background());
  // Diagonal strap: one component.
  for (int i = 0; i < 6; ++i) lm.at(i, i) = 1;
  // Ignore pixels never form instances.
  lm.at(9, 0) = 255;
  lm.at(9, 1) = 255;
  auto dets = segments_to_instances(lm, {4, 4}, 1);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].class_id == 1);
  CHECK(dets[0].bbox == BBox{0, 0, 6, 6});
  CHECK(segments_to_instances(lm, {4, 4}, 7).empty());
  CHECK(segments_to_instances(lm, {4, 4}, 6).size() == 1);

  // Same-class components touching other classes stay separate per class.
  LabelMap two(4, 4, space, 0);
  for (int y = 0; y < 4; ++y) two.at(y, 2) = 1;
  const auto comps = connected_components(two, space.background(), space.ignore);
  REQUIRE(comps.size() == 3);
  CHECK(comps[0].label == 0);
  CHECK(comps[1].label == 0);
  CHECK(comps[2].label == 1);
  CHECK(comps[0].area == 8);
  CHECK(comps[1].area == 4);
}

TEST_CASE("area averaging gives partial coverage") {
  // 2x2 raster, left column set, down to 1x1: half coverage.
  const InstanceMask m = area_average({1, 0, 1, 0}, 2, 2, 1, 1);
  CHECK(m.at(0, 0) == doctest::Approx(0.5));
  // 3 -> 2 columns: each output cell spans 1.5 input pixels.
  const InstanceMask n = area_average({1, 0, 0}, 1, 3, 1, 2);
  CHECK(n.at(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(n.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("native-resolution round trip is pixel exact at scale 1") {
  Rng rng(3);
  const LabelSpace space{4, 255};
  ShapeSceneOptions opts;
  opts.min_side = 5;
  opts.max_side = 30;
  opts.max_shapes = 8;
  opts.gap = 2;
  for (int trial = 0; trial < 10; ++trial) {
    const LabelMap gt = synthetic_shape_scene(rng, 80, 96, space, opts);
    const auto dets = segments_to_instances(gt, MaskDims{0, 0}, 1);
    const CanvasSpec spec{space.num_classes, gt.rows, gt.cols, 1};
    CHECK(project_to_semantic(dets, spec, 0.5f) == gt);
  }
}

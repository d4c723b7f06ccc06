#include "doctest.h"
#include "imp/projection.hpp"
#include "imp/types.hpp"

using namespace imp;

namespace {

Detection make_det(float score, BBox box, int h, int w, float fill, int cls = 0) {
  Detection d;
  d.class_id = cls;
  d.score = score;
  d.bbox = box;
  d.mask = InstanceMask(h, w, fill);
  return d;
}

ErrorCode code_of(const Detection& d, const CanvasSpec& spec) {
  try {
    validate_detection(d, spec);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("validate_detection worked examples") {
  const CanvasSpec spec{3, 16, 16, 4};
  CHECK_NOTHROW(validate_detection(make_det(0.5f, {0, 0, 10, 10}, 2, 2, 0.5f), spec));
  CHECK(code_of(make_det(1.2f, {0, 0, 10, 10}, 2, 2, 0.5f), spec) == ErrorCode::InvalidScore);
  CHECK(code_of(make_det(0.5f, {5, 5, 5, 9}, 2, 2, 0.5f), spec) == ErrorCode::InvalidBox);
}

TEST_CASE("validate_detection rejects each field and names it") {
  const CanvasSpec spec{3, 16, 16, 4};
  CHECK(code_of(make_det(-0.1f, {0, 0, 1, 1}, 1, 1, 0.f), spec) == ErrorCode::InvalidScore);
  CHECK(code_of(make_det(0.5f, {0, 3, 1, 2}, 1, 1, 0.f), spec) == ErrorCode::InvalidBox);
  CHECK(code_of(make_det(0.5f, {0, 0, INFINITY, 2}, 1, 1, 0.f), spec) == ErrorCode::InvalidBox);
  CHECK(code_of(make_det(0.5f, {0, 0, 1, 1}, 2, 2, 1.5f), spec) ==
        ErrorCode::InvalidMaskValue);
  CHECK(code_of(make_det(0.5f, {0, 0, 1, 1}, 2, 2, NAN), spec) == ErrorCode::InvalidMaskValue);
  CHECK(code_of(make_det(0.5f, {0, 0, 1, 1}, 1, 1, 0.f, 3), spec) ==
        ErrorCode::ClassOutOfRange);
  try {
    validate_detection(make_det(2.f, {0, 0, 1, 1}, 1, 1, 0.f), spec);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("score") != std::string::npos);
  }
}

TEST_CASE("boxes may leave the image") {
  const CanvasSpec spec{1, 16, 16, 4};
  CHECK_NOTHROW(validate_detection(make_det(0.5f, {-40, -40, -20, -20}, 1, 1, 1.f), spec));
}

TEST_CASE("detection indices must be unique and contiguous") {
  const CanvasSpec spec{1, 16, 16, 4};
  std::vector<Detection> dets{make_det(0.5f, {0, 0, 4, 4}, 1, 1, 1.f),
                              make_det(0.5f, {0, 0, 4, 4}, 1, 1, 1.f)};
  dets[0].index = 1;
  dets[1].index = 0;
  CHECK_NOTHROW(validate_detections(std::span<const Detection>(dets), spec));
  dets[1].index = 1;
  CHECK_THROWS_AS(validate_detections(std::span<const Detection>(dets), spec), Error);
  dets[1].index = 2;
  CHECK_THROWS_AS(validate_detections(std::span<const Detection>(dets), spec), Error);
}

TEST_CASE("canvas dims round up and allocation is zero") {
  const CanvasSpec spec{2, 5, 9, 4};
  CHECK(spec.rows() == 2);
  CHECK(spec.cols() == 3);
  Canvas canvas(spec);
  CHECK(canvas.values.data.size() == 12);
  for (float v : canvas.values.data) CHECK(v == 0.f);

  const auto empty = imp_forward(std::vector<Detection>{}, spec);
  for (float v : empty.canvas.values.data) CHECK(v == 0.f);
  for (auto w : empty.provenance.winner) CHECK(w == kNoWinner);
}

TEST_CASE("label space rejects colliding sentinels") {
  CHECK_NOTHROW(validate_label_space({19, 255}));
  CHECK_THROWS_AS(validate_label_space({19, 19}), Error);
  CHECK_THROWS_AS(validate_label_space({19, 3}), Error);
  LabelSpace s{4, 255};
  CHECK(s.background() == 4);
  CHECK(s.valid(4));
  CHECK(s.valid(255));
  CHECK_FALSE(s.valid(7));
}

#include "imp/types.hpp"

#include <cmath>
#include <string>

namespace imp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidScore: return "InvalidScore";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::InvalidMaskValue: return "InvalidMaskValue";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::InvalidIndex: return "InvalidIndex";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnknownClassName: return "UnknownClassName";
    case ErrorCode::RunSumMismatch: return "RunSumMismatch";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::MissingPair: return "MissingPair";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void validate_spec(const CanvasSpec& spec) {
  if (spec.num_classes < 1)
    throw Error(ErrorCode::InvalidArgument, "num_classes must be >= 1");
  if (spec.height < 1 || spec.width < 1)
    throw Error(ErrorCode::InvalidArgument, "image height and width must be >= 1");
  if (spec.scale < 1) throw Error(ErrorCode::InvalidArgument, "scale must be >= 1");
}

void validate_label_space(const LabelSpace& space) {
  if (space.num_classes < 1)
    throw Error(ErrorCode::InvalidArgument, "num_classes must be >= 1");
  if (space.num_classes > 65534)
    throw Error(ErrorCode::InvalidArgument, "num_classes does not fit 16-bit labels");
  if (space.ignore < space.num_classes || space.ignore == space.background())
    throw Error(ErrorCode::InvalidArgument,
                "ignore label " + std::to_string(space.ignore) +
                    " collides with a class id or background (" +
                    std::to_string(space.background()) + ")");
}

template <class T>
void validate_detection(const BasicDetection<T>& d, const CanvasSpec& spec) {
  if (!(std::isfinite(static_cast<double>(d.score)) && d.score >= T(0) && d.score <= T(1)))
    throw Error(ErrorCode::InvalidScore, "score: " + std::to_string(d.score) + " not in [0,1]");
  const BBox& b = d.bbox;
  if (!(std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) && std::isfinite(b.y1)))
    throw Error(ErrorCode::InvalidBox, "bbox: coordinates must be finite");
  if (!(b.x1 > b.x0)) throw Error(ErrorCode::InvalidBox, "bbox: x1 must exceed x0");
  if (!(b.y1 > b.y0)) throw Error(ErrorCode::InvalidBox, "bbox: y1 must exceed y0");
  if (d.mask.h < 1 || d.mask.w < 1 ||
      d.mask.values.size() != static_cast<std::size_t>(d.mask.h) * d.mask.w)
    throw Error(ErrorCode::InvalidMaskValue, "mask: dims must be >= 1 and match value count");
  for (std::size_t i = 0; i < d.mask.values.size(); ++i) {
    const T v = d.mask.values[i];
    if (!(v >= T(0) && v <= T(1)))
      throw Error(ErrorCode::InvalidMaskValue,
                  "mask: value at " + std::to_string(i) + " not in [0,1]");
  }
  if (d.class_id < 0 || d.class_id >= spec.num_classes)
    throw Error(ErrorCode::ClassOutOfRange, "class_id: " + std::to_string(d.class_id) +
                                                " not in [0," + std::to_string(spec.num_classes) +
                                                ")");
}

template <class T>
void validate_detections(std::span<const BasicDetection<T>> dets, const CanvasSpec& spec) {
  std::vector<char> seen(dets.size(), 0);
  for (const auto& d : dets) {
    validate_detection(d, spec);
    if (d.index < 0 || static_cast<std::size_t>(d.index) >= dets.size() || seen[d.index])
      throw Error(ErrorCode::InvalidIndex,
                  "index: " + std::to_string(d.index) +
                      " is duplicated or outside 0.." + std::to_string(dets.size()) + "-1");
    seen[d.index] = 1;
  }
}

template void validate_detection(const BasicDetection<float>&, const CanvasSpec&);
template void validate_detection(const BasicDetection<double>&, const CanvasSpec&);
template void validate_detections(std::span<const BasicDetection<float>>, const CanvasSpec&);
template void validate_detections(std::span<const BasicDetection<double>>, const CanvasSpec&);

}  // namespace imp

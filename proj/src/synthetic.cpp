#include "imp/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace imp {

template <class T>
std::vector<BasicDetection<T>> random_detections(Rng& rng, const CanvasSpec& spec, int count,
                                                 const RandomDetectionOptions& o) {
  static constexpr double kScoreLevels[] = {0.25, 0.5, 0.75, 1.0};
  static constexpr double kMaskLevels[] = {0.0, 0.5, 1.0};
  std::vector<BasicDetection<T>> out;
  out.reserve(count);
  const double H = spec.height;
  const double W = spec.width;
  for (int i = 0; i < count; ++i) {
    BasicDetection<T> d;
    d.index = i;
    d.class_id = rng.uniform_int(0, spec.num_classes - 1);
    d.score = o.quantized ? static_cast<T>(kScoreLevels[rng.uniform_int(0, 3)])
                          : static_cast<T>(rng.uniform(o.min_score, o.max_score));
    const double bw = std::max(0.5, W * rng.uniform(o.min_box_fraction, o.max_box_fraction));
    const double bh = std::max(0.5, H * rng.uniform(o.min_box_fraction, o.max_box_fraction));
    const double x0 = o.allow_outside ? rng.uniform(-0.25 * bw, W - 0.75 * bw)
                                      : rng.uniform(0.0, std::max(0.0, W - bw));
    const double y0 = o.allow_outside ? rng.uniform(-0.25 * bh, H - 0.75 * bh)
                                      : rng.uniform(0.0, std::max(0.0, H - bh));
    d.bbox = BBox{static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x0 + bw),
                  static_cast<float>(y0 + bh)};
    if (!(d.bbox.x1 > d.bbox.x0)) d.bbox.x1 = std::nextafter(d.bbox.x0, d.bbox.x0 + 1.f);
    if (!(d.bbox.y1 > d.bbox.y0)) d.bbox.y1 = std::nextafter(d.bbox.y0, d.bbox.y0 + 1.f);
    const int mh = rng.uniform_int(o.min_mask, o.max_mask);
    const int mw = rng.uniform_int(o.min_mask, o.max_mask);
    d.mask = BasicMask<T>(mh, mw);
    for (auto& v : d.mask.values)
      v = o.quantized ? static_cast<T>(kMaskLevels[rng.uniform_int(0, 2)])
                      : static_cast<T>(rng.uniform(o.min_mask_value, o.max_mask_value));
    out.push_back(std::move(d));
  }
  return out;
}

template std::vector<BasicDetection<float>> random_detections(Rng&, const CanvasSpec&, int,
                                                              const RandomDetectionOptions&);
template std::vector<BasicDetection<double>> random_detections(Rng&, const CanvasSpec&, int,
                                                               const RandomDetectionOptions&);

LabelMap random_labelmap(Rng& rng, int rows, int cols, const LabelSpace& space,
                         double ignore_fraction) {
  LabelMap lm(rows, cols, space, space.background());
  for (auto& v : lm.labels) {
    if (ignore_fraction > 0.0 && rng.bernoulli(ignore_fraction)) v = space.ignore;
    else v = static_cast<std::uint16_t>(rng.uniform_int(0, space.num_classes));
  }
  return lm;
}

LabelMap random_blocky_labelmap(Rng& rng, int rows, int cols, const LabelSpace& space,
                                int rectangles, double ignore_fraction) {
  LabelMap lm(rows, cols, space, space.background());
  for (int r = 0; r < rectangles; ++r) {
    const int y0 = rng.uniform_int(0, rows - 1);
    const int x0 = rng.uniform_int(0, cols - 1);
    const int y1 = rng.uniform_int(y0, rows - 1);
    const int x1 = rng.uniform_int(x0, cols - 1);
    std::uint16_t label;
    if (ignore_fraction > 0.0 && rng.bernoulli(ignore_fraction)) label = space.ignore;
    else label = static_cast<std::uint16_t>(rng.uniform_int(0, space.num_classes));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) lm.at(y, x) = label;
  }
  return lm;
}

LabelMap synthetic_shape_scene(Rng& rng, int rows, int cols, const LabelSpace& space,
                               const ShapeSceneOptions& o) {
  LabelMap lm(rows, cols, space, space.background());
  struct Rect {
    int x0, y0, x1, y1;  // inclusive-exclusive
  };
  std::vector<Rect> placed;
  int attempts = 0;
  while (static_cast<int>(placed.size()) < o.max_shapes && attempts < 400) {
    ++attempts;
    const int max_w = std::min(o.max_side, cols - 2 * o.gap);
    const int max_h = std::min(o.max_side, rows - 2 * o.gap);
    if (max_w < o.min_side || max_h < o.min_side) break;
    const int w = rng.uniform_int(o.min_side, max_w);
    const int h = rng.uniform_int(o.min_side, max_h);
    const int x0 = rng.uniform_int(o.gap, cols - o.gap - w);
    const int y0 = rng.uniform_int(o.gap, rows - o.gap - h);
    const Rect r{x0, y0, x0 + w, y0 + h};
    bool clear = true;
    for (const Rect& p : placed) {
      if (r.x0 < p.x1 + o.gap && p.x0 < r.x1 + o.gap && r.y0 < p.y1 + o.gap &&
          p.y0 < r.y1 + o.gap) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    placed.push_back(r);
    const auto label = static_cast<std::uint16_t>(rng.uniform_int(0, space.num_classes - 1));
    const bool ellipse = rng.bernoulli(0.5);
    const double cx = 0.5 * (r.x0 + r.x1);
    const double cy = 0.5 * (r.y0 + r.y1);
    const double ax = 0.5 * w;
    const double ay = 0.5 * h;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        if (ellipse) {
          const double dx = (x + 0.5 - cx) / ax;
          const double dy = (y + 0.5 - cy) / ay;
          if (dx * dx + dy * dy > 1.0) continue;
        }
        lm.at(y, x) = label;
      }
    }
  }
  return lm;
}

}  // namespace imp

#include "imp/segments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace imp {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Keeps the smaller index as root so roots are first-in-raster-order pixels.
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

// Per-axis overlap of output cell i ([i*n/m, (i+1)*n/m)) with input pixel j.
std::vector<std::vector<std::pair<int, double>>> overlap_weights(int in, int out) {
  std::vector<std::vector<std::pair<int, double>>> weights(out);
  const double step = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double lo = i * step;
    const double hi = (i + 1) * step;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int j = first; j <= last; ++j) {
      const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
      if (overlap > 0.0) weights[i].emplace_back(j, overlap / step);
    }
  }
  return weights;
}

}  // namespace

std::vector<Component> connected_components(const LabelMap& labels, std::uint16_t skip_a,
                                            std::uint16_t skip_b) {
  const int rows = labels.rows;
  const int cols = labels.cols;
  DisjointSet sets(labels.size());
  auto skipped = [&](std::uint16_t v) { return v == skip_a || v == skip_b; };
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const std::uint16_t v = labels.at(y, x);
      if (skipped(v)) continue;
      const auto here = static_cast<std::uint32_t>(y * cols + x);
      // Previously visited 8-neighbours: W, NW, N, NE.
      const int dy[] = {0, -1, -1, -1};
      const int dx[] = {-1, -1, 0, 1};
      for (int k = 0; k < 4; ++k) {
        const int yy = y + dy[k];
        const int xx = x + dx[k];
        if (yy < 0 || xx < 0 || xx >= cols) continue;
        if (labels.at(yy, xx) == v) sets.unite(here, static_cast<std::uint32_t>(yy * cols + xx));
      }
    }
  }

  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<Component> comps;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const std::uint16_t v = labels.at(y, x);
      if (skipped(v)) continue;
      const auto here = static_cast<std::uint32_t>(y * cols + x);
      const std::uint32_t root = sets.find(here);
      auto [it, inserted] = slot.try_emplace(root, comps.size());
      if (inserted) {
        Component c;
        c.label = v;
        c.min_x = c.max_x = x;
        c.min_y = c.max_y = y;
        comps.push_back(std::move(c));
      }
      Component& c = comps[it->second];
      c.min_x = std::min(c.min_x, x);
      c.max_x = std::max(c.max_x, x);
      c.max_y = y;
      c.pixels.push_back(here);
      ++c.area;
    }
  }
  // Discovery order is raster order of first pixels; a stable sort by label
  // keeps that order within each label.
  std::stable_sort(comps.begin(), comps.end(),
                   [](const Component& a, const Component& b) { return a.label < b.label; });
  return comps;
}

InstanceMask area_average(const std::vector<std::uint8_t>& raster, int rows, int cols,
                          int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw Error(ErrorCode::InvalidArgument, "mask dims must be >= 1");
  const auto wy = overlap_weights(rows, out_h);
  const auto wx = overlap_weights(cols, out_w);
  InstanceMask mask(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (const auto& [y, ay] : wy[r])
        for (const auto& [x, ax] : wx[c])
          if (raster[static_cast<std::size_t>(y) * cols + x]) acc += ay * ax;
      mask.at(r, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return mask;
}

std::vector<Detection> segments_to_instances(const LabelMap& gt, MaskDims dims, int min_area) {
  if (!dims.native() && (dims.h < 1 || dims.w < 1))
    throw Error(ErrorCode::InvalidArgument, "mask dims must be >= 1, or 0x0 for native");
  const auto comps = connected_components(gt, gt.space.background(), gt.space.ignore);
  std::vector<Detection> out;
  for (const Component& comp : comps) {
    if (comp.label >= gt.space.num_classes) continue;  // stray out-of-space values
    if (comp.area < static_cast<std::size_t>(std::max(min_area, 0))) continue;
    const int bw = comp.max_x - comp.min_x + 1;
    const int bh = comp.max_y - comp.min_y + 1;
    std::vector<std::uint8_t> raster(static_cast<std::size_t>(bw) * bh, 0);
    for (std::uint32_t p : comp.pixels) {
      const int y = static_cast<int>(p) / gt.cols - comp.min_y;
      const int x = static_cast<int>(p) % gt.cols - comp.min_x;
      raster[static_cast<std::size_t>(y) * bw + x] = 1;
    }
    Detection d;
    d.class_id = comp.label;
    d.score = 1.f;
    d.bbox = BBox{static_cast<float>(comp.min_x), static_cast<float>(comp.min_y),
                  static_cast<float>(comp.max_x + 1), static_cast<float>(comp.max_y + 1)};
    d.mask = dims.native() ? area_average(raster, bh, bw, bh, bw)
                           : area_average(raster, bh, bw, dims.h, dims.w);
    d.index = static_cast<int>(out.size());
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace imp

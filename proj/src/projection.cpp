#include "imp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "imp/simd/isa.hpp"
#include "kernels/scalar.hpp"

namespace imp {

std::optional<SamplePoint> pre_map(int cell_y, int cell_x, const BBox& box, int mask_h,
                                   int mask_w, const CanvasSpec& spec) {
  const auto col = sample_axis(cell_x, spec.scale, box.x0, box.x1, mask_w);
  if (!col) return std::nullopt;
  const auto row = sample_axis(cell_y, spec.scale, box.y0, box.y1, mask_h);
  if (!row) return std::nullopt;
  SamplePoint p;
  p.col = *col;
  p.row = *row;
  const float cx = (static_cast<float>(cell_x) + 0.5f) * static_cast<float>(spec.scale);
  const float cy = (static_cast<float>(cell_y) + 0.5f) * static_cast<float>(spec.scale);
  p.u = (cx - box.x0) / (box.x1 - box.x0) * static_cast<float>(mask_w) - 0.5f;
  p.v = (cy - box.y0) / (box.y1 - box.y0) * static_cast<float>(mask_h) - 0.5f;
  return p;
}

namespace {

struct AxisRange {
  int begin = 0;  // first covered cell
  std::vector<AxisSample> samples;
};

// sample_axis is monotone in the cell index, so covered cells form one run.
// Start from a conservative arithmetic guess and let sample_axis decide.
AxisRange covered_cells(int cells, int scale, float lo, float hi, int extent) {
  AxisRange range;
  const double s = scale;
  int first = static_cast<int>(std::floor(static_cast<double>(lo) / s - 0.5)) - 1;
  int last = static_cast<int>(std::ceil(static_cast<double>(hi) / s - 0.5)) + 1;
  first = std::clamp(first, 0, cells);
  last = std::clamp(last, 0, cells - 1);
  bool started = false;
  for (int i = first; i <= last; ++i) {
    const auto sample = sample_axis(i, scale, lo, hi, extent);
    if (sample) {
      if (!started) {
        range.begin = i;
        started = true;
      }
      range.samples.push_back(*sample);
    } else if (started) {
      break;
    }
  }
  return range;
}

template <class T>
void update_row(T* canvas, std::int32_t* winner, const T* top, const T* bottom, T wy0, T wy1,
                T score, std::int32_t index, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    simd::active_kernels().row_update(canvas, winner, top, bottom, wy0, wy1, score, index, n);
  } else {
    simd::scalar::row_update<T>(canvas, winner, top, bottom, wy0, wy1, score, index, n);
  }
}

}  // namespace

template <class T>
ForwardResult<T> imp_forward(std::span<const BasicDetection<T>> detections,
                             const CanvasSpec& spec) {
  validate_spec(spec);
  validate_detections(detections, spec);

  ForwardResult<T> result{BasicCanvas<T>(spec), Provenance(spec)};
  const int rows = spec.rows();
  const int cols = spec.cols();
  std::vector<T> resampled;  // mask rows resampled onto the covered columns

  for (const auto& det : detections) {
    const AxisRange xr = covered_cells(cols, spec.scale, det.bbox.x0, det.bbox.x1, det.mask.w);
    if (xr.samples.empty()) continue;
    const AxisRange yr = covered_cells(rows, spec.scale, det.bbox.y0, det.bbox.y1, det.mask.h);
    if (yr.samples.empty()) continue;

    const std::size_t n = xr.samples.size();
    resampled.assign(static_cast<std::size_t>(det.mask.h) * n, T(0));
    for (int r = 0; r < det.mask.h; ++r) {
      const T* src = det.mask.row(r);
      T* dst = resampled.data() + static_cast<std::size_t>(r) * n;
      for (std::size_t j = 0; j < n; ++j) {
        const AxisSample& s = xr.samples[j];
        dst[j] = static_cast<T>(s.w_lo) * src[s.lo] + static_cast<T>(s.w_hi) * src[s.hi];
      }
    }

    T* plane = result.canvas.values.channel(det.class_id).data();
    std::int32_t* win = result.provenance.winner.data() +
                        static_cast<std::size_t>(det.class_id) * rows * cols;
    for (std::size_t i = 0; i < yr.samples.size(); ++i) {
      const AxisSample& s = yr.samples[i];
      const std::size_t offset = static_cast<std::size_t>(yr.begin + i) * cols + xr.begin;
      update_row<T>(plane + offset, win + offset,
                    resampled.data() + static_cast<std::size_t>(s.lo) * n,
                    resampled.data() + static_cast<std::size_t>(s.hi) * n,
                    static_cast<T>(s.w_lo), static_cast<T>(s.w_hi), det.score, det.index, n);
    }
  }
  return result;
}

template <class T>
std::vector<DetectionGrad> imp_backward(const Tensor3<T>& grad_canvas, const Provenance& prov,
                                        std::span<const BasicDetection<T>> detections,
                                        BackwardOptions options) {
  const CanvasSpec& spec = prov.spec;
  if (grad_canvas.channels != spec.num_classes || grad_canvas.rows != spec.rows() ||
      grad_canvas.cols != spec.cols())
    throw Error(ErrorCode::ShapeMismatch,
                "grad_canvas is " + std::to_string(grad_canvas.channels) + "x" +
                    std::to_string(grad_canvas.rows) + "x" + std::to_string(grad_canvas.cols) +
                    ", provenance is " + std::to_string(spec.num_classes) + "x" +
                    std::to_string(spec.rows()) + "x" + std::to_string(spec.cols()));

  std::vector<DetectionGrad> grads(detections.size());
  std::vector<int> position(detections.size(), -1);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    if (d.index < 0 || static_cast<std::size_t>(d.index) >= detections.size())
      throw Error(ErrorCode::InvalidIndex, "detection index out of range");
    position[d.index] = static_cast<int>(i);
    grads[i].h = d.mask.h;
    grads[i].w = d.mask.w;
    grads[i].d_mask.assign(d.mask.values.size(), 0.0);
  }

  const int rows = spec.rows();
  const int cols = spec.cols();
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        const std::int32_t w = prov.at(c, y, x);
        if (w == kNoWinner) continue;
        const double g = static_cast<double>(grad_canvas.at(c, y, x));
        if (g == 0.0) continue;
        if (w < 0 || static_cast<std::size_t>(w) >= detections.size() || position[w] < 0)
          throw Error(ErrorCode::ShapeMismatch, "provenance refers to an unknown detection");
        const auto& det = detections[position[w]];
        const auto sample = prov.sample(y, x, det);
        if (!sample)
          throw Error(ErrorCode::ShapeMismatch,
                      "provenance does not match detections (winner does not cover cell)");
        DetectionGrad& dg = grads[position[w]];
        if (options.score_gradient)
          dg.d_score += g * static_cast<double>(sample_value(det.mask, *sample));
        const double gs = g * static_cast<double>(det.score);
        const auto weights = sample->weights();
        const int mw = det.mask.w;
        const AxisSample& rs = sample->row;
        const AxisSample& cs = sample->col;
        dg.d_mask[static_cast<std::size_t>(rs.lo) * mw + cs.lo] += gs * weights[0];
        dg.d_mask[static_cast<std::size_t>(rs.lo) * mw + cs.hi] += gs * weights[1];
        dg.d_mask[static_cast<std::size_t>(rs.hi) * mw + cs.lo] += gs * weights[2];
        dg.d_mask[static_cast<std::size_t>(rs.hi) * mw + cs.hi] += gs * weights[3];
      }
    }
  }
  return grads;
}

template <class T>
std::vector<NearTie> find_near_ties(std::span<const BasicDetection<T>> detections,
                                    const CanvasSpec& spec, double margin) {
  validate_spec(spec);
  const int rows = spec.rows();
  const int cols = spec.cols();
  std::vector<NearTie> ties;
  struct Entry {
    double value;
    int index;
  };
  std::vector<Entry> entries;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        entries.clear();
        for (const auto& d : detections) {
          if (d.class_id != c) continue;
          const auto p = pre_map(y, x, d.bbox, d.mask.h, d.mask.w, spec);
          if (!p) continue;
          entries.push_back({static_cast<double>(d.score) *
                                 static_cast<double>(sample_value(d.mask, *p)),
                             d.index});
        }
        if (entries.empty()) continue;
        double best = 0.0;
        for (const auto& e : entries) best = std::max(best, e.value);
        NearTie tie{c, y, x, {}};
        for (const auto& e : entries)
          if (best - e.value <= margin) tie.contenders.push_back(e.index);
        // The empty-cell zero competes too.
        const bool near_zero = best <= margin;
        if (tie.contenders.size() > 1 || near_zero) {
          std::sort(tie.contenders.begin(), tie.contenders.end());
          ties.push_back(std::move(tie));
        }
      }
    }
  }
  return ties;
}

template ForwardResult<float> imp_forward(std::span<const BasicDetection<float>>,
                                          const CanvasSpec&);
template ForwardResult<double> imp_forward(std::span<const BasicDetection<double>>,
                                           const CanvasSpec&);
template std::vector<DetectionGrad> imp_backward(const Tensor3<float>&, const Provenance&,
                                                 std::span<const BasicDetection<float>>,
                                                 BackwardOptions);
template std::vector<DetectionGrad> imp_backward(const Tensor3<double>&, const Provenance&,
                                                 std::span<const BasicDetection<double>>,
                                                 BackwardOptions);
template std::vector<NearTie> find_near_ties(std::span<const BasicDetection<float>>,
                                             const CanvasSpec&, double);
template std::vector<NearTie> find_near_ties(std::span<const BasicDetection<double>>,
                                             const CanvasSpec&, double);

}  // namespace imp

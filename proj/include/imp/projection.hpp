#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imp/sampling.hpp"
#include "imp/types.hpp"

namespace imp {

inline constexpr std::int32_t kNoWinner = -1;

/// Per-cell argmax record of a forward pass: the `index` of the detection
/// whose scaled sample is stored in the canvas, or kNoWinner when nothing
/// contributed a strictly positive value. The winner's bilinear sample is
/// not stored; `sample()` re-derives it through pre_map, which is
/// deterministic and identical to what the forward kernel evaluated.
struct Provenance {
  CanvasSpec spec;
  std::vector<std::int32_t> winner;

  Provenance() = default;
  explicit Provenance(const CanvasSpec& s)
      : spec(s),
        winner(static_cast<std::size_t>(s.num_classes) * s.rows() * s.cols(), kNoWinner) {}

  std::int32_t at(int c, int y, int x) const {
    return winner[(static_cast<std::size_t>(c) * spec.rows() + y) * spec.cols() + x];
  }
  template <class T>
  std::optional<SamplePoint> sample(int y, int x, const BasicDetection<T>& winner_det) const {
    return pre_map(y, x, winner_det.bbox, winner_det.mask.h, winner_det.mask.w, spec);
  }
  bool operator==(const Provenance&) const = default;
};

template <class T>
struct ForwardResult {
  BasicCanvas<T> canvas;
  Provenance provenance;
};

/// canvas(c, p) = max over detections i of class c whose box contains p of
/// S_i * bilinear(M_i, pre_i(p)); zero where nothing covers. Ties go to the
/// lowest detection index, so both outputs are independent of list order.
/// Float runs through the active SIMD kernel; double uses the scalar one.
template <class T>
ForwardResult<T> imp_forward(std::span<const BasicDetection<T>> detections,
                             const CanvasSpec& spec);

template <class T>
ForwardResult<T> imp_forward(const std::vector<BasicDetection<T>>& detections,
                             const CanvasSpec& spec) {
  return imp_forward(std::span<const BasicDetection<T>>(detections), spec);
}

/// Gradient of a scalar loss with respect to one detection's score and mask.
struct DetectionGrad {
  double d_score = 0.0;
  int h = 0;
  int w = 0;
  std::vector<double> d_mask;  // row-major h x w
};

struct BackwardOptions {
  /// When false the score is treated as a constant and d_score stays 0.
  bool score_gradient = true;
};

/// Routes each cell's upstream gradient to its winner only. Output is
/// ordered like `detections`.
template <class T>
std::vector<DetectionGrad> imp_backward(const Tensor3<T>& grad_canvas, const Provenance& prov,
                                        std::span<const BasicDetection<T>> detections,
                                        BackwardOptions options = {});

template <class T>
std::vector<DetectionGrad> imp_backward(const Tensor3<T>& grad_canvas, const Provenance& prov,
                                        const std::vector<BasicDetection<T>>& detections,
                                        BackwardOptions options = {}) {
  return imp_backward(grad_canvas, prov, std::span<const BasicDetection<T>>(detections),
                      options);
}

/// A canvas cell where two contributions (or the winner and the empty-cell
/// zero) lie within `margin` of each other. `contenders` holds the indices
/// of every detection within margin of the maximum.
struct NearTie {
  int c = 0;
  int y = 0;
  int x = 0;
  std::vector<int> contenders;
};

template <class T>
std::vector<NearTie> find_near_ties(std::span<const BasicDetection<T>> detections,
                                    const CanvasSpec& spec, double margin);

}  // namespace imp

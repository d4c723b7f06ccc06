#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "imp/types.hpp"

namespace imp {

/// Channel concatenation: features first, then canvas channels.
template <class T>
Tensor3<T> concat_canvas(const Tensor3<T>& features, const Tensor3<T>& canvas);

template <class T>
Tensor3<T> concat_canvas(const Tensor3<T>& features, const BasicCanvas<T>& canvas) {
  return concat_canvas(features, canvas.values);
}

/// Splits an upstream gradient of a concatenation back into the feature
/// part (first `feature_channels` channels) and the canvas part.
template <class T>
std::pair<Tensor3<T>, Tensor3<T>> split_concat_grad(const Tensor3<T>& upstream,
                                                    int feature_channels);

/// Per-pixel 1x1 linear map: out[k](p) = bias[k] + sum_j weight[k][j] * in[j](p).
struct LinearReadout {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weight;  // out_channels x in_channels
  std::vector<double> bias;

  Tensor3<double> forward(const Tensor3<double>& input) const;
  Tensor3<double> backward(const Tensor3<double>& upstream) const;  // d input
};

struct BootstrapResult {
  double loss = 0.0;
  Tensor3<double> grad_logits;
  std::vector<std::size_t> kept;  // flat pixel indices, ascending
  std::size_t valid_pixels = 0;
};

/// Hard-bootstrapped softmax cross-entropy. Keeps the
/// k = ceil(keep_fraction * valid) valid pixels with the largest loss (ties
/// to the lower flat index) and averages over them. Labels must be class
/// ids below logits.channels or the target's IGNORE value.
BootstrapResult bootstrapped_ce(const Tensor3<double>& logits, const LabelMap& target,
                                double keep_fraction);

/// Same loss and gradient over a fixed pixel set (used to hold the
/// selection constant under finite differences).
BootstrapResult cross_entropy_on(const Tensor3<double>& logits, const LabelMap& target,
                                 std::span<const std::size_t> pixels);

/// Per-pixel cross-entropy; NaN at IGNORE pixels.
std::vector<double> pixel_cross_entropy(const Tensor3<double>& logits, const LabelMap& target);

}  // namespace imp

#include "imp/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace imp {

template <class T>
Tensor3<T> concat_canvas(const Tensor3<T>& features, const Tensor3<T>& canvas) {
  if (features.channels > 0 && (features.rows != canvas.rows || features.cols != canvas.cols))
    throw Error(ErrorCode::ShapeMismatch,
                "features are " + std::to_string(features.rows) + "x" +
                    std::to_string(features.cols) + ", canvas is " +
                    std::to_string(canvas.rows) + "x" + std::to_string(canvas.cols));
  Tensor3<T> out(features.channels + canvas.channels, canvas.rows, canvas.cols);
  std::copy(features.data.begin(), features.data.end(), out.data.begin());
  std::copy(canvas.data.begin(), canvas.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(features.data.size()));
  return out;
}

template <class T>
std::pair<Tensor3<T>, Tensor3<T>> split_concat_grad(const Tensor3<T>& upstream,
                                                    int feature_channels) {
  if (feature_channels < 0 || feature_channels > upstream.channels)
    throw Error(ErrorCode::ShapeMismatch, "feature channel count exceeds upstream channels");
  Tensor3<T> features(feature_channels, upstream.rows, upstream.cols);
  Tensor3<T> canvas(upstream.channels - feature_channels, upstream.rows, upstream.cols);
  const auto split = upstream.data.begin() + static_cast<std::ptrdiff_t>(features.data.size());
  std::copy(upstream.data.begin(), split, features.data.begin());
  std::copy(split, upstream.data.end(), canvas.data.begin());
  return {std::move(features), std::move(canvas)};
}

template Tensor3<float> concat_canvas(const Tensor3<float>&, const Tensor3<float>&);
template Tensor3<double> concat_canvas(const Tensor3<double>&, const Tensor3<double>&);
template std::pair<Tensor3<float>, Tensor3<float>> split_concat_grad(const Tensor3<float>&, int);
template std::pair<Tensor3<double>, Tensor3<double>> split_concat_grad(const Tensor3<double>&,
                                                                       int);

Tensor3<double> LinearReadout::forward(const Tensor3<double>& input) const {
  if (input.channels != in_channels)
    throw Error(ErrorCode::ShapeMismatch, "readout expects " + std::to_string(in_channels) +
                                              " channels, got " +
                                              std::to_string(input.channels));
  Tensor3<double> out(out_channels, input.rows, input.cols);
  const std::size_t plane = input.plane();
  for (int k = 0; k < out_channels; ++k) {
    auto dst = out.channel(k);
    std::fill(dst.begin(), dst.end(), bias[k]);
    for (int j = 0; j < in_channels; ++j) {
      const double wkj = weight[static_cast<std::size_t>(k) * in_channels + j];
      const auto src = input.channel(j);
      for (std::size_t p = 0; p < plane; ++p) dst[p] += wkj * src[p];
    }
  }
  return out;
}

Tensor3<double> LinearReadout::backward(const Tensor3<double>& upstream) const {
  if (upstream.channels != out_channels)
    throw Error(ErrorCode::ShapeMismatch, "readout gradient has the wrong channel count");
  Tensor3<double> grad(in_channels, upstream.rows, upstream.cols);
  const std::size_t plane = upstream.plane();
  for (int j = 0; j < in_channels; ++j) {
    auto dst = grad.channel(j);
    for (int k = 0; k < out_channels; ++k) {
      const double wkj = weight[static_cast<std::size_t>(k) * in_channels + j];
      const auto src = upstream.channel(k);
      for (std::size_t p = 0; p < plane; ++p) dst[p] += wkj * src[p];
    }
  }
  return grad;
}

namespace {

void check_target(const Tensor3<double>& logits, const LabelMap& target) {
  if (logits.channels < 2)
    throw Error(ErrorCode::InvalidArgument, "cross-entropy needs at least 2 logit channels");
  if (logits.rows != target.rows || logits.cols != target.cols)
    throw Error(ErrorCode::ShapeMismatch,
                "logits are " + std::to_string(logits.rows) + "x" + std::to_string(logits.cols) +
                    ", target is " + std::to_string(target.rows) + "x" +
                    std::to_string(target.cols));
  for (std::size_t i = 0; i < target.labels.size(); ++i) {
    const std::uint16_t t = target.labels[i];
    if (t != target.space.ignore && t >= logits.channels)
      throw Error(ErrorCode::LabelOutOfRange, "target label " + std::to_string(t) +
                                                  " at pixel " + std::to_string(i) +
                                                  " has no logit channel");
  }
}

// Stable log-sum-exp and per-class softmax at pixel p.
double log_sum_exp(const Tensor3<double>& logits, std::size_t p) {
  const std::size_t plane = logits.plane();
  double m = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < logits.channels; ++c) m = std::max(m, logits.data[c * plane + p]);
  double s = 0.0;
  for (int c = 0; c < logits.channels; ++c) s += std::exp(logits.data[c * plane + p] - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> pixel_cross_entropy(const Tensor3<double>& logits, const LabelMap& target) {
  check_target(logits, target);
  const std::size_t plane = logits.plane();
  std::vector<double> loss(plane, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t p = 0; p < plane; ++p) {
    const std::uint16_t t = target.labels[p];
    if (t == target.space.ignore) continue;
    loss[p] = log_sum_exp(logits, p) - logits.data[t * plane + p];
  }
  return loss;
}

BootstrapResult cross_entropy_on(const Tensor3<double>& logits, const LabelMap& target,
                                 std::span<const std::size_t> pixels) {
  check_target(logits, target);
  if (pixels.empty()) throw Error(ErrorCode::NoValidPixels, "no pixels selected for the loss");
  const std::size_t plane = logits.plane();
  BootstrapResult result;
  result.grad_logits = Tensor3<double>(logits.channels, logits.rows, logits.cols);
  result.kept.assign(pixels.begin(), pixels.end());
  std::sort(result.kept.begin(), result.kept.end());
  const double inv_k = 1.0 / static_cast<double>(pixels.size());
  double total = 0.0;
  for (std::size_t p : result.kept) {
    const std::uint16_t t = target.labels[p];
    if (t == target.space.ignore)
      throw Error(ErrorCode::InvalidArgument, "selected pixel " + std::to_string(p) + " is IGNORE");
    const double lse = log_sum_exp(logits, p);
    total += lse - logits.data[t * plane + p];
    for (int c = 0; c < logits.channels; ++c) {
      const double prob = std::exp(logits.data[c * plane + p] - lse);
      result.grad_logits.data[c * plane + p] = (prob - (c == t ? 1.0 : 0.0)) * inv_k;
    }
  }
  result.loss = total * inv_k;
  return result;
}

BootstrapResult bootstrapped_ce(const Tensor3<double>& logits, const LabelMap& target,
                                double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "keep_fraction must lie in (0, 1]");
  const std::vector<double> loss = pixel_cross_entropy(logits, target);
  std::vector<std::size_t> valid;
  for (std::size_t p = 0; p < loss.size(); ++p)
    if (!std::isnan(loss[p])) valid.push_back(p);
  if (valid.empty()) throw Error(ErrorCode::NoValidPixels, "every target pixel is IGNORE");

  // The small offset keeps products like 0.1 * 50 from rounding up a pixel.
  auto k = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(valid.size()) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, valid.size());
  if (k < valid.size()) {
    auto harder = [&](std::size_t a, std::size_t b) {
      return loss[a] > loss[b] || (loss[a] == loss[b] && a < b);
    };
    std::nth_element(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     valid.end(), harder);
    valid.resize(k);
  }
  BootstrapResult result = cross_entropy_on(logits, target, valid);
  result.valid_pixels = static_cast<std::size_t>(
      std::count_if(loss.begin(), loss.end(), [](double v) { return !std::isnan(v); }));
  return result;
}

}  // namespace imp

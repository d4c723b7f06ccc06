#include "imp/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "imp/projection.hpp"
#include "imp/simd/isa.hpp"

namespace imp {

namespace {

void check_tau(float tau) {
  if (!(tau >= 0.f && tau <= 1.f))
    throw Error(ErrorCode::InvalidArgument, "tau must lie in [0,1]");
}

LabelSpace space_for(const CanvasSpec& spec, std::uint16_t ignore) {
  LabelSpace space{spec.num_classes, ignore};
  validate_label_space(space);
  return space;
}

}  // namespace

LabelMap canvas_to_labels(const Canvas& canvas, float tau, std::uint16_t ignore) {
  check_tau(tau);
  const CanvasSpec& spec = canvas.spec;
  const LabelSpace space = space_for(spec, ignore);
  LabelMap out(spec.rows(), spec.cols(), space, space.background());
  simd::active_kernels().argmax(canvas.values.data.data(), canvas.values.plane(),
                                spec.num_classes, tau, space.background(), out.labels.data(),
                                out.labels.size());
  return out;
}

LabelMap upsample_labels(const LabelMap& labels, const CanvasSpec& spec) {
  validate_spec(spec);
  if (labels.rows != spec.rows() || labels.cols != spec.cols())
    throw Error(ErrorCode::ShapeMismatch,
                "label grid is " + std::to_string(labels.rows) + "x" +
                    std::to_string(labels.cols) + ", canvas spec expects " +
                    std::to_string(spec.rows()) + "x" + std::to_string(spec.cols()));
  LabelMap out(spec.height, spec.width, labels.space, labels.space.background());
  const int s = spec.scale;
  for (int y = 0; y < spec.height; ++y) {
    const std::uint16_t* src = labels.labels.data() + static_cast<std::size_t>(y / s) * labels.cols;
    std::uint16_t* dst = out.labels.data() + static_cast<std::size_t>(y) * spec.width;
    for (int x = 0; x < spec.width; ++x) dst[x] = src[x / s];
  }
  return out;
}

LabelMap upsample_canvas_bilinear(const Canvas& canvas, float tau, std::uint16_t ignore) {
  check_tau(tau);
  const CanvasSpec& spec = canvas.spec;
  const LabelSpace space = space_for(spec, ignore);
  const int rows = spec.rows();
  const int cols = spec.cols();
  const float s = static_cast<float>(spec.scale);

  auto axis = [](int pixel, float scale, int cells, int& i0, int& i1, float& frac) {
    float u = (static_cast<float>(pixel) + 0.5f) / scale - 0.5f;
    u = std::clamp(u, 0.f, static_cast<float>(cells - 1));
    i0 = static_cast<int>(std::floor(u));
    i1 = std::min(i0 + 1, cells - 1);
    frac = u - static_cast<float>(i0);
  };

  // Channel-major image-resolution planes so the argmax kernel applies as-is.
  Tensor3<float> up(spec.num_classes, 1, spec.width);
  LabelMap out(spec.height, spec.width, space, space.background());
  std::vector<int> x0(spec.width), x1(spec.width);
  std::vector<float> fx(spec.width);
  for (int x = 0; x < spec.width; ++x) axis(x, s, cols, x0[x], x1[x], fx[x]);
  for (int y = 0; y < spec.height; ++y) {
    int y0 = 0, y1 = 0;
    float fy = 0.f;
    axis(y, s, rows, y0, y1, fy);
    for (int c = 0; c < spec.num_classes; ++c) {
      for (int x = 0; x < spec.width; ++x) {
        const float a = canvas.at(c, y0, x0[x]) * (1.f - fx[x]) + canvas.at(c, y0, x1[x]) * fx[x];
        const float b = canvas.at(c, y1, x0[x]) * (1.f - fx[x]) + canvas.at(c, y1, x1[x]) * fx[x];
        up.at(c, 0, x) = a * (1.f - fy) + b * fy;
      }
    }
    simd::active_kernels().argmax(up.data.data(), up.plane(), spec.num_classes, tau,
                                  space.background(),
                                  out.labels.data() + static_cast<std::size_t>(y) * spec.width,
                                  static_cast<std::size_t>(spec.width));
  }
  return out;
}

LabelMap project_to_semantic(std::span<const Detection> detections, const CanvasSpec& spec,
                             float tau, UpsampleMode mode, std::uint16_t ignore) {
  check_tau(tau);
  const auto forward = imp_forward(detections, spec);
  if (mode == UpsampleMode::BilinearCanvas)
    return upsample_canvas_bilinear(forward.canvas, tau, ignore);

  const LabelSpace space = space_for(spec, ignore);
  const int cols = spec.cols();
  const int s = spec.scale;
  LabelMap out(spec.height, spec.width, space, space.background());
  std::vector<std::uint16_t> cell_labels(static_cast<std::size_t>(cols));
  const auto& kernels = simd::active_kernels();
  const std::size_t plane = forward.canvas.values.plane();
  for (int cy = 0; cy < spec.rows(); ++cy) {
    kernels.argmax(forward.canvas.values.data.data() + static_cast<std::size_t>(cy) * cols, plane,
                   spec.num_classes, tau, space.background(), cell_labels.data(),
                   cell_labels.size());
    const int y_end = std::min(spec.height, (cy + 1) * s);
    for (int y = cy * s; y < y_end; ++y) {
      std::uint16_t* dst = out.labels.data() + static_cast<std::size_t>(y) * spec.width;
      for (int x = 0; x < spec.width; ++x) dst[x] = cell_labels[x / s];
    }
  }
  return out;
}

}  // namespace imp

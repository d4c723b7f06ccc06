#include "imp/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace imp {

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

BinaryGrid boundary_pixels(const LabelMap& gt) {
  BinaryGrid out(gt.rows, gt.cols);
  const std::uint16_t ignore = gt.space.ignore;
  for (int y = 0; y < gt.rows; ++y) {
    for (int x = 0; x < gt.cols; ++x) {
      const std::uint16_t v = gt.at(y, x);
      if (v == ignore) continue;
      auto differs = [&](int yy, int xx) {
        if (yy < 0 || yy >= gt.rows || xx < 0 || xx >= gt.cols) return false;
        const std::uint16_t n = gt.at(yy, xx);
        return n != ignore && n != v;
      };
      if (differs(y - 1, x) || differs(y + 1, x) || differs(y, x - 1) || differs(y, x + 1))
        out.at(y, x) = 1;
    }
  }
  return out;
}

namespace {

// 1D squared distance transform over f, where f[i] is finite (a squared
// distance) or +inf. Only finite samples seed parabolas; an all-inf line
// stays inf. Values stay small integers, so every result is exact.
void squared_dt_1d(const double* f, double* out, std::size_t n, std::size_t stride,
                   std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (std::size_t qi = 0; qi < n; ++qi) {
    const double fq = f[qi * stride];
    if (!std::isfinite(fq)) continue;
    const double q = static_cast<double>(qi);
    if (k < 0) {
      k = 0;
      v[0] = static_cast<int>(qi);
      z[0] = -kInfiniteDistance;
      z[1] = kInfiniteDistance;
      continue;
    }
    double s = 0.0;
    while (true) {
      const double p = v[k];
      s = ((fq + q * q) - (f[v[k] * stride] + p * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    // k == 0 and s <= z[0] cannot happen since z[0] is -inf.
    ++k;
    v[k] = static_cast<int>(qi);
    z[k] = s;
    z[k + 1] = kInfiniteDistance;
  }
  if (k < 0) {
    for (std::size_t qi = 0; qi < n; ++qi) out[qi * stride] = kInfiniteDistance;
    return;
  }
  int j = 0;
  for (std::size_t qi = 0; qi < n; ++qi) {
    const double q = static_cast<double>(qi);
    while (z[j + 1] < q) ++j;
    const double d = q - v[j];
    out[qi * stride] = d * d + f[v[j] * stride];
  }
}

}  // namespace

DistanceField distance_transform(const BinaryGrid& boundary) {
  DistanceField field{boundary.rows, boundary.cols, {}};
  const std::size_t n = static_cast<std::size_t>(boundary.rows) * boundary.cols;
  std::vector<double> seed(n), columns(n);
  for (std::size_t i = 0; i < n; ++i) seed[i] = boundary.values[i] ? 0.0 : kInfiniteDistance;

  std::vector<int> v;
  std::vector<double> z;
  const std::size_t cols = static_cast<std::size_t>(boundary.cols);
  for (std::size_t x = 0; x < cols; ++x)
    squared_dt_1d(seed.data() + x, columns.data() + x, boundary.rows, cols, v, z);
  field.values.resize(n);
  for (int y = 0; y < boundary.rows; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * cols;
    squared_dt_1d(columns.data() + row, field.values.data() + row, cols, 1, v, z);
  }
  for (double& d : field.values) d = std::sqrt(d);
  return field;
}

void miou_within(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt,
                 const DistanceField& dist, double d_max) {
  if (pred.rows != gt.rows || pred.cols != gt.cols || dist.rows != gt.rows ||
      dist.cols != gt.cols)
    throw Error(ErrorCode::ShapeMismatch,
                "pred, gt and distance field must share dims (gt is " +
                    std::to_string(gt.rows) + "x" + std::to_string(gt.cols) + ")");
  const int background = cm.num_classes();
  const std::uint16_t ignore = gt.space.ignore;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::uint16_t g = gt.labels[i];
    if (g == ignore || !(dist.values[i] <= d_max)) continue;
    const std::uint16_t p = pred.labels[i];
    if (g > background || p > background)
      throw Error(ErrorCode::LabelOutOfRange,
                  "label at pixel " + std::to_string(i) + " exceeds background id");
    cm.add(g, p);
  }
}

}  // namespace imp

#pragma once

#include <cstddef>
#include <cstdint>

namespace imp::simd::scalar {

// Reference kernels. The SIMD variants must reproduce these bit for bit.
// Internal linkage: ISA-specific translation units include this header and
// must not hand their copies to the linker.
namespace {

template <class T>
inline void row_update(T* canvas, std::int32_t* winner, const T* top, const T* bottom, T wy0,
                       T wy1, T score, std::int32_t index, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const T value = wy0 * top[j] + wy1 * bottom[j];
    const T contribution = score * value;
    const T current = canvas[j];
    if (contribution > current ||
        (contribution == current && contribution > T(0) && index < winner[j])) {
      canvas[j] = contribution;
      winner[j] = index;
    }
  }
}

template <class T>
inline void argmax(const T* planes, std::size_t stride, int classes, T tau,
                   std::uint16_t background, std::uint16_t* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    T best = planes[j];
    int best_class = 0;
    for (int c = 1; c < classes; ++c) {
      const T v = planes[c * stride + j];
      if (v > best) {
        best = v;
        best_class = c;
      }
    }
    out[j] = best > tau ? static_cast<std::uint16_t>(best_class) : background;
  }
}

}  // namespace
}  // namespace imp::simd::scalar

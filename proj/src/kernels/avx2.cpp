// Compiled with -mavx2. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <cstddef>
#include <cstdint>

#include "kernels/scalar.hpp"

namespace imp::simd::avx2 {

void row_update(float* canvas, std::int32_t* winner, const float* top, const float* bottom,
                float wy0, float wy1, float score, std::int32_t index, std::size_t n) {
  const __m256 vwy0 = _mm256_set1_ps(wy0);
  const __m256 vwy1 = _mm256_set1_ps(wy1);
  const __m256 vscore = _mm256_set1_ps(score);
  const __m256 zero = _mm256_setzero_ps();
  const __m256i vindex = _mm256_set1_epi32(index);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256 t = _mm256_loadu_ps(top + j);
    const __m256 b = _mm256_loadu_ps(bottom + j);
    const __m256 value = _mm256_add_ps(_mm256_mul_ps(vwy0, t), _mm256_mul_ps(vwy1, b));
    const __m256 contribution = _mm256_mul_ps(vscore, value);
    const __m256 current = _mm256_loadu_ps(canvas + j);
    const __m256i win = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(winner + j));

    const __m256 greater = _mm256_cmp_ps(contribution, current, _CMP_GT_OQ);
    const __m256 equal = _mm256_cmp_ps(contribution, current, _CMP_EQ_OQ);
    const __m256 positive = _mm256_cmp_ps(contribution, zero, _CMP_GT_OQ);
    const __m256 lower = _mm256_castsi256_ps(_mm256_cmpgt_epi32(win, vindex));
    const __m256 take =
        _mm256_or_ps(greater, _mm256_and_ps(_mm256_and_ps(equal, positive), lower));

    _mm256_storeu_ps(canvas + j, _mm256_blendv_ps(current, contribution, take));
    const __m256 new_win =
        _mm256_blendv_ps(_mm256_castsi256_ps(win), _mm256_castsi256_ps(vindex), take);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(winner + j), _mm256_castps_si256(new_win));
  }
  scalar::row_update(canvas + j, winner + j, top + j, bottom + j, wy0, wy1, score, index, n - j);
}

void argmax(const float* planes, std::size_t stride, int classes, float tau,
            std::uint16_t background, std::uint16_t* out, std::size_t n) {
  const __m256 vtau = _mm256_set1_ps(tau);
  const __m256i vbackground = _mm256_set1_epi32(background);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256 best = _mm256_loadu_ps(planes + j);
    __m256i best_class = _mm256_setzero_si256();
    for (int c = 1; c < classes; ++c) {
      const __m256 v = _mm256_loadu_ps(planes + c * stride + j);
      const __m256 greater = _mm256_cmp_ps(v, best, _CMP_GT_OQ);
      best = _mm256_blendv_ps(best, v, greater);
      best_class = _mm256_castps_si256(_mm256_blendv_ps(
          _mm256_castsi256_ps(best_class), _mm256_castsi256_ps(_mm256_set1_epi32(c)), greater));
    }
    const __m256 claimed = _mm256_cmp_ps(best, vtau, _CMP_GT_OQ);
    const __m256i label = _mm256_castps_si256(_mm256_blendv_ps(
        _mm256_castsi256_ps(vbackground), _mm256_castsi256_ps(best_class), claimed));
    // Labels fit in 16 bits; pack the eight 32-bit lanes down.
    const __m128i lo = _mm256_castsi256_si128(label);
    const __m128i hi = _mm256_extracti128_si256(label, 1);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + j), _mm_packus_epi32(lo, hi));
  }
  scalar::argmax(planes + j, stride, classes, tau, background, out + j, n - j);
}

}  // namespace imp::simd::avx2

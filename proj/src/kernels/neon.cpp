#if defined(__aarch64__) || defined(__ARM_NEON)
#include <arm_neon.h>

#include <cstddef>
#include <cstdint>

#include "kernels/scalar.hpp"

namespace imp::simd::neon {

void row_update(float* canvas, std::int32_t* winner, const float* top, const float* bottom,
                float wy0, float wy1, float score, std::int32_t index, std::size_t n) {
  const float32x4_t vwy0 = vdupq_n_f32(wy0);
  const float32x4_t vwy1 = vdupq_n_f32(wy1);
  const float32x4_t vscore = vdupq_n_f32(score);
  const float32x4_t zero = vdupq_n_f32(0.f);
  const int32x4_t vindex = vdupq_n_s32(index);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    // vmulq + vaddq, never vmlaq/vfmaq: rounding must match the scalar path.
    const float32x4_t value =
        vaddq_f32(vmulq_f32(vwy0, vld1q_f32(top + j)), vmulq_f32(vwy1, vld1q_f32(bottom + j)));
    const float32x4_t contribution = vmulq_f32(vscore, value);
    const float32x4_t current = vld1q_f32(canvas + j);
    const int32x4_t win = vld1q_s32(winner + j);

    const uint32x4_t greater = vcgtq_f32(contribution, current);
    const uint32x4_t equal = vceqq_f32(contribution, current);
    const uint32x4_t positive = vcgtq_f32(contribution, zero);
    const uint32x4_t lower = vcgtq_s32(win, vindex);
    const uint32x4_t take = vorrq_u32(greater, vandq_u32(vandq_u32(equal, positive), lower));

    vst1q_f32(canvas + j, vbslq_f32(take, contribution, current));
    vst1q_s32(winner + j, vbslq_s32(take, vindex, win));
  }
  scalar::row_update(canvas + j, winner + j, top + j, bottom + j, wy0, wy1, score, index, n - j);
}

void argmax(const float* planes, std::size_t stride, int classes, float tau,
            std::uint16_t background, std::uint16_t* out, std::size_t n) {
  const float32x4_t vtau = vdupq_n_f32(tau);
  const uint32x4_t vbackground = vdupq_n_u32(background);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    float32x4_t best = vld1q_f32(planes + j);
    uint32x4_t best_class = vdupq_n_u32(0);
    for (int c = 1; c < classes; ++c) {
      const float32x4_t v = vld1q_f32(planes + c * stride + j);
      const uint32x4_t greater = vcgtq_f32(v, best);
      best = vbslq_f32(greater, v, best);
      best_class = vbslq_u32(greater, vdupq_n_u32(static_cast<std::uint32_t>(c)), best_class);
    }
    const uint32x4_t claimed = vcgtq_f32(best, vtau);
    const uint32x4_t label = vbslq_u32(claimed, best_class, vbackground);
    vst1_u16(out + j, vmovn_u32(label));
  }
  scalar::argmax(planes + j, stride, classes, tau, background, out + j, n - j);
}

}  // namespace imp::simd::neon
#endif

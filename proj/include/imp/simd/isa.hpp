#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace imp::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);
Isa parse_isa(std::string_view name);  // throws imp::Error(InvalidArgument)

/// ISAs compiled into this build and supported by the running CPU.
std::vector<Isa> available_isas();
bool is_available(Isa isa);

/// Best available ISA, unless IMP_ISA names another available one.
Isa default_isa();

/// ISA used by imp_forward<float> and canvas_to_labels. Thread-unsafe to
/// change while kernels run.
Isa active_isa();
void set_active_isa(Isa isa);

/// canvas[j] / winner[j] take S*(wy0*top[j] + wy1*bottom[j]) when it is
/// larger, or equal, positive and `index` is lower than the current winner.
using RowUpdateFn = void (*)(float* canvas, std::int32_t* winner, const float* top,
                             const float* bottom, float wy0, float wy1, float score,
                             std::int32_t index, std::size_t n);

/// out[j] = argmax_c planes[c*stride + j] (lowest c on ties) if that max
/// exceeds tau, else background.
using ArgmaxFn = void (*)(const float* planes, std::size_t stride, int classes, float tau,
                          std::uint16_t background, std::uint16_t* out, std::size_t n);

struct KernelTable {
  RowUpdateFn row_update;
  ArgmaxFn argmax;
};

const KernelTable& kernels(Isa isa);
inline const KernelTable& active_kernels() { return kernels(active_isa()); }

}  // namespace imp::simd

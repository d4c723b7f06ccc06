#include <cstdlib>
#include <string>

#include "imp/error.hpp"
#include "imp/simd/isa.hpp"
#include "kernels/scalar.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define IMP_HAVE_AVX2_KERNELS 1
#else
#define IMP_HAVE_AVX2_KERNELS 0
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
#define IMP_HAVE_NEON_KERNELS 1
#else
#define IMP_HAVE_NEON_KERNELS 0
#endif

namespace imp::simd {

#if IMP_HAVE_AVX2_KERNELS
namespace avx2 {
void row_update(float*, std::int32_t*, const float*, const float*, float, float, float,
                std::int32_t, std::size_t);
void argmax(const float*, std::size_t, int, float, std::uint16_t, std::uint16_t*, std::size_t);
}  // namespace avx2
#endif

#if IMP_HAVE_NEON_KERNELS
namespace neon {
void row_update(float*, std::int32_t*, const float*, const float*, float, float, float,
                std::int32_t, std::size_t);
void argmax(const float*, std::size_t, int, float, std::uint16_t, std::uint16_t*, std::size_t);
}  // namespace neon
#endif

namespace {

const KernelTable kScalarTable{&scalar::row_update<float>, &scalar::argmax<float>};
#if IMP_HAVE_AVX2_KERNELS
const KernelTable kAvx2Table{&avx2::row_update, &avx2::argmax};
#endif
#if IMP_HAVE_NEON_KERNELS
const KernelTable kNeonTable{&neon::row_update, &neon::argmax};
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if IMP_HAVE_AVX2_KERNELS
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
      return IMP_HAVE_NEON_KERNELS != 0;
  }
  return false;
}

Isa& active_slot() {
  static Isa isa = default_isa();
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "neon") return Isa::Neon;
  throw Error(ErrorCode::InvalidArgument, "unknown ISA '" + std::string(name) + "'");
}

bool is_available(Isa isa) { return cpu_supports(isa); }

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
    if (cpu_supports(isa)) out.push_back(isa);
  return out;
}

Isa default_isa() {
  if (const char* env = std::getenv("IMP_ISA"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (cpu_supports(requested)) return requested;
  }
  if (cpu_supports(Isa::Avx2)) return Isa::Avx2;
  if (cpu_supports(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

Isa active_isa() { return active_slot(); }

void set_active_isa(Isa isa) {
  if (!cpu_supports(isa))
    throw Error(ErrorCode::InvalidArgument,
                "ISA '" + std::string(to_string(isa)) + "' is not available on this machine");
  active_slot() = isa;
}

const KernelTable& kernels(Isa isa) {
  switch (isa) {
#if IMP_HAVE_AVX2_KERNELS
    case Isa::Avx2:
      if (cpu_supports(isa)) return kAvx2Table;
      break;
#endif
#if IMP_HAVE_NEON_KERNELS
    case Isa::Neon:
      return kNeonTable;
#endif
    default:
      break;
  }
  if (isa != Isa::Scalar)
    throw Error(ErrorCode::InvalidArgument,
                "ISA '" + std::string(to_string(isa)) + "' is not available on this machine");
  return kScalarTable;
}

}  // namespace imp::simd

#include <stdexcept>
#include <string>

#include "kernels.hpp"

namespace detkit::simd {

namespace {

constexpr Kernels kScalar{&detail::iou_row_scalar, &detail::axpy_scalar};
#if defined(DETKIT_BUILD_AVX2)
constexpr Kernels kAvx2{&detail::iou_row_avx2, &detail::axpy_avx2};
#endif
#if defined(DETKIT_BUILD_NEON)
constexpr Kernels kNeon{&detail::iou_row_neon, &detail::axpy_neon};
#endif

bool cpu_has_avx2() noexcept {
#if defined(DETKIT_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = __builtin_cpu_supports("avx2");
  return has;
#else
  return false;
#endif
}

}  // namespace

std::string_view name(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool supported(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
    case Backend::neon:
#if defined(DETKIT_BUILD_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend best() noexcept {
  if (supported(Backend::avx2)) return Backend::avx2;
  if (supported(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

std::vector<Backend> available() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (supported(b)) out.push_back(b);
  }
  return out;
}

const Kernels& kernels(Backend b) {
  if (!supported(b)) {
    throw std::invalid_argument("simd backend not available: " + std::string(name(b)));
  }
  switch (b) {
#if defined(DETKIT_BUILD_AVX2)
    case Backend::avx2: return kAvx2;
#endif
#if defined(DETKIT_BUILD_NEON)
    case Backend::neon: return kNeon;
#endif
    default: return kScalar;
  }
}

const Kernels& kernels() noexcept {
  static const Kernels& selected = kernels(best());
  return selected;
}

}  // namespace detkit::simd

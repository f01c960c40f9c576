#pragma once

#include "detkit/simd.hpp"

namespace detkit::simd::detail {

void iou_row_scalar(const CornerBox& a, const BoxColumns& b, double* out);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);

#if defined(DETKIT_BUILD_AVX2)
void iou_row_avx2(const CornerBox& a, const BoxColumns& b, double* out);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
#endif

#if defined(DETKIT_BUILD_NEON)
void iou_row_neon(const CornerBox& a, const BoxColumns& b, double* out);
void axpy_neon(double alpha, const double* x, double* y, std::size_t n);
#endif

}  // namespace detkit::simd::detail

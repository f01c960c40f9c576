#include <immintrin.h>

#include "kernels.hpp"

#include "detkit/geometry.hpp"

namespace detkit::simd::detail {

// std::min(a, b) returns a unless b < a; _mm256_min_pd(b, a) returns a unless
// b < a as well (second operand on ties). Same for max. Finite inputs only.
void iou_row_avx2(const CornerBox& a, const BoxColumns& b, double* out) {
  const __m256d ax1 = _mm256_set1_pd(a.x1);
  const __m256d ay1 = _mm256_set1_pd(a.y1);
  const __m256d ax2 = _mm256_set1_pd(a.x2);
  const __m256d ay2 = _mm256_set1_pd(a.y2);
  const __m256d aarea = _mm256_set1_pd(a.area);
  const __m256d zero = _mm256_setzero_pd();

  std::size_t j = 0;
  for (; j + 4 <= b.n; j += 4) {
    const __m256d bx1 = _mm256_loadu_pd(b.x1 + j);
    const __m256d by1 = _mm256_loadu_pd(b.y1 + j);
    const __m256d bx2 = _mm256_loadu_pd(b.x2 + j);
    const __m256d by2 = _mm256_loadu_pd(b.y2 + j);
    const __m256d barea = _mm256_loadu_pd(b.area + j);

    const __m256d iw = _mm256_sub_pd(_mm256_min_pd(bx2, ax2), _mm256_max_pd(bx1, ax1));
    const __m256d ih = _mm256_sub_pd(_mm256_min_pd(by2, ay2), _mm256_max_pd(by1, ay1));
    const __m256d overlap = _mm256_and_pd(_mm256_cmp_pd(iw, zero, _CMP_GT_OQ),
                                          _mm256_cmp_pd(ih, zero, _CMP_GT_OQ));
    const __m256d inter = _mm256_and_pd(overlap, _mm256_mul_pd(iw, ih));
    const __m256d uni = _mm256_sub_pd(_mm256_add_pd(aarea, barea), inter);
    const __m256d nonempty = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
    const __m256d ratio = _mm256_div_pd(inter, uni);
    _mm256_storeu_pd(out + j, _mm256_and_pd(nonempty, ratio));
  }
  for (; j < b.n; ++j) {
    out[j] = detkit::detail::iou_corners(a.x1, a.y1, a.x2, a.y2, a.area,
                                         b.x1[j], b.y1[j], b.x2[j], b.y2[j], b.area[j]);
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

}  // namespace detkit::simd::detail

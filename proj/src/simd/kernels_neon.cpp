#include <arm_neon.h>

#include "kernels.hpp"

#include "detkit/geometry.hpp"

namespace detkit::simd::detail {

// vminq/vmaxq agree with std::min/std::max on finite, non-signed-zero ties;
// a -0.0/+0.0 tie only changes the sign of a zero width, which the > 0 masks
// treat identically.
void iou_row_neon(const CornerBox& a, const BoxColumns& b, double* out) {
  const float64x2_t ax1 = vdupq_n_f64(a.x1);
  const float64x2_t ay1 = vdupq_n_f64(a.y1);
  const float64x2_t ax2 = vdupq_n_f64(a.x2);
  const float64x2_t ay2 = vdupq_n_f64(a.y2);
  const float64x2_t aarea = vdupq_n_f64(a.area);
  const float64x2_t zero = vdupq_n_f64(0.0);

  std::size_t j = 0;
  for (; j + 2 <= b.n; j += 2) {
    const float64x2_t iw = vsubq_f64(vminq_f64(ax2, vld1q_f64(b.x2 + j)),
                                     vmaxq_f64(ax1, vld1q_f64(b.x1 + j)));
    const float64x2_t ih = vsubq_f64(vminq_f64(ay2, vld1q_f64(b.y2 + j)),
                                     vmaxq_f64(ay1, vld1q_f64(b.y1 + j)));
    const uint64x2_t overlap = vandq_u64(vcgtq_f64(iw, zero), vcgtq_f64(ih, zero));
    const float64x2_t prod = vmulq_f64(iw, ih);
    const float64x2_t inter =
        vreinterpretq_f64_u64(vandq_u64(overlap, vreinterpretq_u64_f64(prod)));
    const float64x2_t uni = vsubq_f64(vaddq_f64(aarea, vld1q_f64(b.area + j)), inter);
    const uint64x2_t nonempty = vcgtq_f64(uni, zero);
    const float64x2_t ratio = vdivq_f64(inter, uni);
    vst1q_f64(out + j, vreinterpretq_f64_u64(vandq_u64(nonempty, vreinterpretq_u64_f64(ratio))));
  }
  for (; j < b.n; ++j) {
    out[j] = detkit::detail::iou_corners(a.x1, a.y1, a.x2, a.y2, a.area,
                                         b.x1[j], b.y1[j], b.x2[j], b.y2[j], b.area[j]);
  }
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // vmulq + vaddq, not vfmaq: must round like the scalar loop.
    const float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

}  // namespace detkit::simd::detail

#include "kernels.hpp"

#include "detkit/geometry.hpp"

namespace detkit::simd::detail {

void iou_row_scalar(const CornerBox& a, const BoxColumns& b, double* out) {
  for (std::size_t j = 0; j < b.n; ++j) {
    out[j] = detkit::detail::iou_corners(a.x1, a.y1, a.x2, a.y2, a.area,
                                         b.x1[j], b.y1[j], b.x2[j], b.y2[j], b.area[j]);
  }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

}  // namespace detkit::simd::detail

#include "detkit/geometry.hpp"

#include <cmath>
#include <sstream>

#include "detkit/errors.hpp"
#include "detkit/simd.hpp"

namespace detkit {

bool is_valid(const BBox& b) noexcept {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
         b.w >= 0.0 && b.h >= 0.0;
}

void validate(const BBox& b) {
  if (!is_valid(b)) {
    std::ostringstream msg;
    msg << "invalid box [" << b.x << ", " << b.y << ", " << b.w << ", " << b.h
        << "]: fields must be finite with w, h >= 0";
    throw DomainError(msg.str());
  }
}

BoxSet::BoxSet(std::span<const BBox> boxes) {
  const std::size_t n = boxes.size();
  x1_.resize(n);
  y1_.resize(n);
  x2_.resize(n);
  y2_.resize(n);
  area_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const BBox& b = boxes[i];
    x1_[i] = b.x;
    y1_[i] = b.y;
    x2_[i] = b.x + b.w;
    y2_[i] = b.y + b.h;
    area_[i] = detail::corner_area(x1_[i], y1_[i], x2_[i], y2_[i]);
  }
}

void iou_row(const BBox& a, const BoxSet& set, std::span<double> out) {
  if (out.size() != set.size()) throw DimensionError("iou_row: output length mismatch");
  const double x2 = a.x + a.w, y2 = a.y + a.h;
  const simd::CornerBox corner{a.x, a.y, x2, y2, detail::corner_area(a.x, a.y, x2, y2)};
  const simd::BoxColumns cols{set.x1(), set.y1(), set.x2(), set.y2(), set.areas(), set.size()};
  simd::kernels().iou_row(corner, cols, out.data());
}

IouMatrix iou_matrix(std::span<const BBox> as, std::span<const BBox> bs) {
  IouMatrix m(as.size(), bs.size());
  if (as.empty() || bs.empty()) return m;
  const BoxSet set(bs);
  for (std::size_t i = 0; i < as.size(); ++i) iou_row(as[i], set, m.row(i));
  return m;
}

}  // namespace detkit

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace detkit {

/// Axis-aligned box in pixel units, COCO convention: left/top edge plus size.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// True when all fields are finite and w, h >= 0.
bool is_valid(const BBox& b) noexcept;

/// Throws DomainError if `b` is not valid.
void validate(const BBox& b);

inline double area(const BBox& b) noexcept { return b.w * b.h; }

namespace detail {

// Shared by the scalar iou() and every SIMD kernel; the vector kernels
// reproduce this exact sequence of roundings.
/// Area from corners; agrees exactly with the intersection of a box with itself.
inline double corner_area(double x1, double y1, double x2, double y2) noexcept { return (x2 - x1) * (y2 - y1); }

inline double iou_corners(double ax1, double ay1, double ax2, double ay2, double a_area,
                          double bx1, double by1, double bx2, double by2,
                          double b_area) noexcept {
  const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double ih = std::min(ay2, by2) - std::max(ay1, by1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = (a_area + b_area) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace detail

/// Intersection over union; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) noexcept {
  const double ax2 = a.x + a.w, ay2 = a.y + a.h, bx2 = b.x + b.w, by2 = b.y + b.h;
  return detail::iou_corners(a.x, a.y, ax2, ay2, detail::corner_area(a.x, a.y, ax2, ay2),
                             b.x, b.y, bx2, by2, detail::corner_area(b.x, b.y, bx2, by2));
}

/// Structure-of-arrays copy of a box list in corner form, the layout the
/// batch kernels stream over.
class BoxSet {
 public:
  BoxSet() = default;
  explicit BoxSet(std::span<const BBox> boxes);

  std::size_t size() const noexcept { return x1_.size(); }
  bool empty() const noexcept { return x1_.empty(); }

  const double* x1() const noexcept { return x1_.data(); }
  const double* y1() const noexcept { return y1_.data(); }
  const double* x2() const noexcept { return x2_.data(); }
  const double* y2() const noexcept { return y2_.data(); }
  const double* areas() const noexcept { return area_.data(); }

 private:
  std::vector<double> x1_, y1_, x2_, y2_, area_;
};

/// out[j] = iou(a, set[j]) for every j; out.size() must equal set.size().
void iou_row(const BBox& a, const BoxSet& set, std::span<double> out);

/// Dense row-major IoU matrix.
class IouMatrix {
 public:
  IouMatrix() = default;
  IouMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Entry (i, j) is bit-identical to iou(as[i], bs[j]).
IouMatrix iou_matrix(std::span<const BBox> as, std::span<const BBox> bs);

}  // namespace detkit

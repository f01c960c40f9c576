#pragma once

// IoU-dynamic calibration: size-adaptive positive thresholds, a blended
// anchor/regression IoU, and the label assignment built on both.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "detkit/geometry.hpp"

namespace detkit::idc {

struct AssignmentConfig {
  double lambda_exp = 0.55;  // growth rate of the threshold with object size
  double alpha0 = 0.6;       // late-training weight on the anchor IoU
  double gamma_exp = 1.5;    // exponent of the anchor/regression disagreement penalty
  double area_scale = 32.0;  // length scale (pixels), compared against sqrt(w * h)
  double floor = 0.25;
  double base = 0.2;
  double slope = 0.15;

  /// Throws DomainError when a field is outside its domain.
  void validate() const;
};

/// max(floor, base + slope * (sqrt(w * h) / area_scale)^lambda).
/// Throws DomainError for negative or non-finite w, h.
double adaptive_threshold(double w, double h, const AssignmentConfig& cfg);

/// Anchor-IoU weight as a function of training progress p = epoch / epochs:
/// 1 before p = 0.1, linear down to alpha0 at p = 0.5, alpha0 after.
double alpha_schedule(double progress, double alpha0);

namespace detail {

inline double dynamic_iou_unchecked(double a_iou, double r_iou, double alpha, double gamma_exp) noexcept {
  const double rest = 1.0 - alpha;
  return alpha * a_iou + rest * r_iou - rest * std::pow(std::abs(a_iou - r_iou), gamma_exp);
}

inline double adaptive_threshold_unchecked(double w, double h, const AssignmentConfig& cfg) noexcept {
  const double ratio = std::sqrt(w * h) / cfg.area_scale;
  return std::max(cfg.floor, cfg.base + cfg.slope * std::pow(ratio, cfg.lambda_exp));
}

}  // namespace detail

/// alpha * A + (1 - alpha) * R - (1 - alpha) * |A - R|^gamma. May be negative.
double dynamic_iou(double a_iou, double r_iou, double alpha, double gamma_exp);

enum class Label : std::uint8_t { negative = 0, positive = 1 };

struct AssignmentResult {
  std::vector<Label> labels;
  std::vector<std::optional<std::size_t>> matched_gt;
  /// Dynamic IoU against the matched GT; NaN when there are no GTs.
  std::vector<double> diou;
  /// Threshold of the matched GT; NaN when there are no GTs.
  std::vector<double> threshold_used;
  double alpha = 1.0;
  std::vector<double> gt_thresholds;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_positive() const noexcept;
};

/// Each anchor is matched to the GT with the largest dynamic IoU (lowest GT
/// index on ties) and labelled positive iff that value strictly exceeds the
/// GT's adaptive threshold. regressed[i] is anchor i's current regression box.
AssignmentResult assign_labels(std::span<const BBox> anchors, std::span<const BBox> regressed,
                               std::span<const BBox> gts, double progress,
                               const AssignmentConfig& cfg = {});

}  // namespace detkit::idc

#pragma once

// COCO-style average precision: greedy score-ordered matching, 101-point
// interpolated precision, IoU sweep 0.50:0.05:0.95 and size buckets.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "detkit/geometry.hpp"

namespace detkit::metrics {

using ImageId = std::int64_t;
using CategoryId = std::int64_t;

struct Detection {
  ImageId image_id = 0;
  BBox box;
  double score = 0.0;
  CategoryId category = 1;
};

struct GroundTruth {
  ImageId image_id = 0;
  BBox box;
  CategoryId category = 1;
};

enum class AreaRange { all, small, medium, large };

inline constexpr double kSmallMaxArea = 32.0 * 32.0;
inline constexpr double kMediumMaxArea = 96.0 * 96.0;

/// small: area < 32^2, medium: [32^2, 96^2), large: >= 96^2.
bool in_range(double box_area, AreaRange range) noexcept;

/// {0.50, 0.55, ..., 0.95}, generated the way numpy.linspace does.
const std::vector<double>& iou_thresholds();

/// {0.00, 0.01, ..., 1.00}, generated the way numpy.linspace does.
const std::vector<double>& recall_thresholds();

struct DetectionMatch {
  std::size_t detection = 0;       // index into the input list
  bool true_positive = false;
  std::optional<std::size_t> gt;   // index into the input list
  double iou = 0.0;
};

/// Detections in descending score order (stable on ties). Each takes the
/// highest-IoU still-unmatched GT of its image and category with
/// IoU >= iou_thresh. Among equal-IoU candidates the later GT wins, as in
/// the reference pycocotools matcher.
std::vector<DetectionMatch> match_detections(std::span<const Detection> dets,
                                             std::span<const GroundTruth> gts, double iou_thresh);

/// Envelope of the precision/recall curve sampled at `recall_grid`; zero
/// where the recall point is never reached. Flags are in score order.
std::vector<double> interpolated_precision(std::span<const bool> tp_flags, std::size_t n_gt,
                                           std::span<const double> recall_grid);

/// Mean of the 101-point interpolated precision; nullopt when n_gt == 0.
std::optional<double> average_precision(std::span<const bool> tp_flags, std::size_t n_gt);

struct PrCurve {
  double iou_threshold = 0.0;
  std::vector<double> recall;
  /// Averaged over categories that have ground truth; empty if none do.
  std::vector<double> precision;
};

struct EvalReport {
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_s;
  std::optional<double> ap_m;
  std::optional<double> ap_l;
  std::vector<double> iou_thresholds;
  std::vector<std::optional<double>> ap_per_threshold;
  std::vector<PrCurve> curves;
};

struct EvalOptions {
  /// Per image and category; unlimited when unset.
  std::optional<std::size_t> max_dets;
  /// Images to evaluate; the union of ids in both lists when unset.
  std::optional<std::vector<ImageId>> image_ids;
};

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                    const EvalOptions& options = {});

}  // namespace detkit::metrics

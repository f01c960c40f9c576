#include "detkit/idc.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <thread>

#include "detkit/errors.hpp"

namespace detkit::idc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Below this many anchors the work is not split across threads.
constexpr std::size_t kParallelMinAnchors = 16384;

void check(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

void assign_range(std::span<const BBox> anchors, std::span<const BBox> regressed,
                  const BoxSet& gt_set, double alpha, double gamma_exp, AssignmentResult& out,
                  std::size_t begin, std::size_t end) {
  const std::size_t m = gt_set.size();
  std::vector<double> a_row(m);
  std::vector<double> r_row(m);
  for (std::size_t i = begin; i < end; ++i) {
    iou_row(anchors[i], gt_set, a_row);
    iou_row(regressed[i], gt_set, r_row);
    std::size_t best = 0;
    double best_d = detail::dynamic_iou_unchecked(a_row[0], r_row[0], alpha, gamma_exp);
    for (std::size_t j = 1; j < m; ++j) {
      const double d = detail::dynamic_iou_unchecked(a_row[j], r_row[j], alpha, gamma_exp);
      if (d > best_d) {
        best_d = d;
        best = j;
      }
    }
    const double thr = out.gt_thresholds[best];
    out.matched_gt[i] = best;
    out.diou[i] = best_d;
    out.threshold_used[i] = thr;
    out.labels[i] = best_d > thr ? Label::positive : Label::negative;
  }
}

}  // namespace

void AssignmentConfig::validate() const {
  check(std::isfinite(lambda_exp) && lambda_exp > 0.0, "lambda must be > 0");
  check(alpha0 > 0.0 && alpha0 <= 1.0, "alpha0 must lie in (0, 1]");
  check(std::isfinite(gamma_exp) && gamma_exp > 0.0, "gamma must be > 0");
  check(std::isfinite(area_scale) && area_scale > 0.0, "area_scale must be > 0");
  check(std::isfinite(floor) && std::isfinite(base) && std::isfinite(slope),
        "threshold constants must be finite");
  check(floor >= 0.0 && floor < 1.0, "threshold floor must lie in [0, 1)");
  check(base > 0.0 && base < 1.0, "threshold base must lie in (0, 1)");
  check(slope >= 0.0, "threshold slope must be >= 0");
}

double adaptive_threshold(double w, double h, const AssignmentConfig& cfg) {
  check(std::isfinite(w) && std::isfinite(h) && w >= 0.0 && h >= 0.0,
        "adaptive_threshold: width and height must be finite and >= 0");
  return detail::adaptive_threshold_unchecked(w, h, cfg);
}

double alpha_schedule(double progress, double alpha0) {
  check(unit_interval(progress), "alpha_schedule: progress must lie in [0, 1]");
  check(alpha0 > 0.0 && alpha0 <= 1.0, "alpha_schedule: alpha0 must lie in (0, 1]");
  if (progress < 0.1) return 1.0;
  if (progress < 0.5) return ((alpha0 - 1.0) / (0.5 - 0.1)) * (progress - 0.1) + 1.0;
  return alpha0;
}

double dynamic_iou(double a_iou, double r_iou, double alpha, double gamma_exp) {
  check(unit_interval(a_iou) && unit_interval(r_iou), "dynamic_iou: IoU values must lie in [0, 1]");
  check(unit_interval(alpha), "dynamic_iou: alpha must lie in [0, 1]");
  check(std::isfinite(gamma_exp) && gamma_exp > 0.0, "dynamic_iou: gamma must be > 0");
  return detail::dynamic_iou_unchecked(a_iou, r_iou, alpha, gamma_exp);
}

std::size_t AssignmentResult::num_positive() const noexcept {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::positive));
}

AssignmentResult assign_labels(std::span<const BBox> anchors, std::span<const BBox> regressed,
                               std::span<const BBox> gts, double progress,
                               const AssignmentConfig& cfg) {
  if (anchors.size() != regressed.size()) {
    throw DimensionError("assign_labels: " + std::to_string(anchors.size()) + " anchors but " +
                         std::to_string(regressed.size()) + " regression boxes");
  }
  cfg.validate();
  for (const BBox& b : anchors) validate(b);
  for (const BBox& b : regressed) validate(b);
  for (const BBox& b : gts) validate(b);

  const std::size_t n = anchors.size();
  AssignmentResult out;
  out.alpha = alpha_schedule(progress, cfg.alpha0);
  out.labels.assign(n, Label::negative);
  out.matched_gt.assign(n, std::nullopt);
  out.diou.assign(n, kNaN);
  out.threshold_used.assign(n, kNaN);
  out.gt_thresholds.reserve(gts.size());
  for (const BBox& g : gts) out.gt_thresholds.push_back(adaptive_threshold(g.w, g.h, cfg));
  if (gts.empty() || n == 0) return out;

  const BoxSet gt_set(gts);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = n >= kParallelMinAnchors ? std::min<std::size_t>(hw, n / 4096) : 1;
  if (workers <= 1) {
    assign_range(anchors, regressed, gt_set, out.alpha, cfg.gamma_exp, out, 0, n);
    return out;
  }
  // Rows are independent; each thread owns a disjoint slice of the outputs.
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back([&, begin, end] {
        assign_range(anchors, regressed, gt_set, out.alpha, cfg.gamma_exp, out, begin, end);
      });
    }
  }
  return out;
}

}  // namespace detkit::idc

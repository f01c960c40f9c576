#include "detkit/metrics.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "detkit/errors.hpp"

namespace detkit::metrics {

namespace {

constexpr std::size_t kNoMatch = static_cast<std::size_t>(-1);

std::vector<double> linspace(double start, double stop, std::size_t num) {
  std::vector<double> out(num);
  const double step = (stop - start) / static_cast<double>(num - 1);
  for (std::size_t i = 0; i < num; ++i) out[i] = static_cast<double>(i) * step + start;
  out.back() = stop;
  return out;
}

// Indices of `scores` sorted by descending score, stable on ties.
std::vector<std::size_t> score_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Greedy matcher shared by match_detections and evaluate. `ious` is
// detections x GTs with detections already in score order; `gt_order` lists
// GT columns with non-ignored GTs first. Returns the matched column per
// detection or kNoMatch.
std::vector<std::size_t> greedy_match(const IouMatrix& ious, std::span<const std::size_t> gt_order,
                                      const std::vector<bool>& gt_ignored, double threshold) {
  std::vector<std::size_t> match(ious.rows(), kNoMatch);
  std::vector<bool> taken(ious.cols(), false);
  for (std::size_t d = 0; d < ious.rows(); ++d) {
    double best_iou = threshold;
    std::size_t best = kNoMatch;
    for (std::size_t g : gt_order) {
      if (taken[g]) continue;
      // Once a real GT is held, ignored GTs (sorted last) cannot displace it.
      if (best != kNoMatch && !gt_ignored[best] && gt_ignored[g]) break;
      if (ious(d, g) < best_iou) continue;
      best_iou = ious(d, g);
      best = g;
    }
    if (best != kNoMatch) {
      taken[best] = true;
      match[d] = best;
    }
  }
  return match;
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Cell {
  std::vector<std::size_t> dets;  // input indices, score order, truncated
  std::vector<std::size_t> gts;   // input indices
  IouMatrix ious;
};

// One (category, area range, IoU threshold) slot of the accumulation.
using Curve = std::optional<std::vector<double>>;

}  // namespace

bool in_range(double box_area, AreaRange range) noexcept {
  switch (range) {
    case AreaRange::all: return true;
    case AreaRange::small: return box_area < kSmallMaxArea;
    case AreaRange::medium: return box_area >= kSmallMaxArea && box_area < kMediumMaxArea;
    case AreaRange::large: return box_area >= kMediumMaxArea;
  }
  return false;
}

const std::vector<double>& iou_thresholds() {
  static const std::vector<double> t = linspace(0.5, 0.95, 10);
  return t;
}

const std::vector<double>& recall_thresholds() {
  static const std::vector<double> r = linspace(0.0, 1.0, 101);
  return r;
}

std::vector<DetectionMatch> match_detections(std::span<const Detection> dets,
                                             std::span<const GroundTruth> gts, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) {
    throw DomainError("match_detections: IoU threshold must lie in (0, 1]");
  }
  std::vector<double> scores;
  scores.reserve(dets.size());
  for (const auto& d : dets) scores.push_back(d.score);
  const std::vector<std::size_t> order = score_order(scores);

  std::vector<DetectionMatch> out(dets.size());
  for (std::size_t r = 0; r < order.size(); ++r) out[r].detection = order[r];

  // Matching is independent per (image, category) group.
  std::map<std::pair<ImageId, CategoryId>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
      groups;  // ranks of detections, indices of GTs
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& d = dets[order[r]];
    groups[{d.image_id, d.category}].first.push_back(r);
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    auto it = groups.find({gts[g].image_id, gts[g].category});
    if (it != groups.end()) it->second.second.push_back(g);
  }

  for (const auto& [key, group] : groups) {
    const auto& [ranks, gt_idx] = group;
    if (gt_idx.empty()) continue;
    IouMatrix ious(ranks.size(), gt_idx.size());
    const BoxSet gt_set([&] {
      std::vector<BBox> boxes;
      for (std::size_t g : gt_idx) boxes.push_back(gts[g].box);
      return boxes;
    }());
    for (std::size_t i = 0; i < ranks.size(); ++i) iou_row(dets[order[ranks[i]]].box, gt_set, ious.row(i));
    std::vector<std::size_t> gt_order(gt_idx.size());
    std::iota(gt_order.begin(), gt_order.end(), std::size_t{0});
    const auto match = greedy_match(ious, gt_order, std::vector<bool>(gt_idx.size(), false), iou_thresh);
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (match[i] == kNoMatch) continue;
      auto& m = out[ranks[i]];
      m.true_positive = true;
      m.gt = gt_idx[match[i]];
      m.iou = ious(i, match[i]);
    }
  }
  return out;
}

std::vector<double> interpolated_precision(std::span<const bool> tp_flags, std::size_t n_gt,
                                           std::span<const double> recall_grid) {
  std::vector<double> out(recall_grid.size(), 0.0);
  if (n_gt == 0 || tp_flags.empty()) return out;

  const std::size_t n = tp_flags.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += tp_flags[i] ? 1 : 0;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  for (std::size_t k = 0; k < recall_grid.size(); ++k) {
    const auto it = std::lower_bound(recall.begin(), recall.end(), recall_grid[k]);
    if (it != recall.end()) out[k] = precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return out;
}

std::optional<double> average_precision(std::span<const bool> tp_flags, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  return mean(interpolated_precision(tp_flags, n_gt, recall_thresholds()));
}

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                    const EvalOptions& options) {
  for (const auto& d : dets) {
    validate(d.box);
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw DomainError("evaluate: score outside [0, 1]");
  }
  for (const auto& g : gts) validate(g.box);

  std::vector<ImageId> images;
  if (options.image_ids) {
    images = *options.image_ids;
  } else {
    for (const auto& g : gts) images.push_back(g.image_id);
    for (const auto& d : dets) images.push_back(d.image_id);
  }
  std::sort(images.begin(), images.end());
  images.erase(std::unique(images.begin(), images.end()), images.end());
  const std::set<ImageId> image_set(images.begin(), images.end());

  std::set<CategoryId> category_set;
  for (const auto& g : gts) category_set.insert(g.category);
  for (const auto& d : dets) category_set.insert(d.category);
  const std::vector<CategoryId> categories(category_set.begin(), category_set.end());

  // Cells keyed by (category, image); std::map iteration gives images in
  // ascending id order within a category.
  std::map<std::pair<CategoryId, ImageId>, Cell> cells;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (image_set.count(gts[i].image_id)) cells[{gts[i].category, gts[i].image_id}].gts.push_back(i);
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (image_set.count(dets[i].image_id)) cells[{dets[i].category, dets[i].image_id}].dets.push_back(i);
  }
  for (auto& [key, cell] : cells) {
    std::vector<double> scores;
    for (std::size_t i : cell.dets) scores.push_back(dets[i].score);
    std::vector<std::size_t> sorted;
    for (std::size_t r : score_order(scores)) sorted.push_back(cell.dets[r]);
    if (options.max_dets && sorted.size() > *options.max_dets) sorted.resize(*options.max_dets);
    cell.dets = std::move(sorted);

    std::vector<BBox> gt_boxes;
    for (std::size_t i : cell.gts) gt_boxes.push_back(gts[i].box);
    const BoxSet gt_set(gt_boxes);
    cell.ious = IouMatrix(cell.dets.size(), cell.gts.size());
    if (!cell.gts.empty()) {
      for (std::size_t r = 0; r < cell.dets.size(); ++r) iou_row(dets[cell.dets[r]].box, gt_set, cell.ious.row(r));
    }
  }

  const auto& thresholds = iou_thresholds();
  const auto& grid = recall_thresholds();
  const std::size_t n_t = thresholds.size();
  constexpr AreaRange kRanges[] = {AreaRange::all, AreaRange::small, AreaRange::medium, AreaRange::large};

  // curves[area][t][category]
  std::vector<std::vector<std::vector<Curve>>> curves(
      4, std::vector<std::vector<Curve>>(n_t, std::vector<Curve>(categories.size())));

  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t k = 0; k < categories.size(); ++k) {
      std::size_t n_pos = 0;
      // Per threshold: (score, is_tp) of every non-ignored detection, in
      // image order then per-image score order.
      std::vector<std::vector<std::pair<double, bool>>> ranked(n_t);
      for (auto it = cells.lower_bound({categories[k], std::numeric_limits<ImageId>::min()});
           it != cells.end() && it->first.first == categories[k]; ++it) {
        const Cell& cell = it->second;
        std::vector<bool> ignored(cell.gts.size());
        std::vector<std::size_t> gt_order;
        for (std::size_t g = 0; g < cell.gts.size(); ++g) {
          ignored[g] = !in_range(area(gts[cell.gts[g]].box), kRanges[a]);
          if (!ignored[g]) {
            gt_order.push_back(g);
            ++n_pos;
          }
        }
        for (std::size_t g = 0; g < cell.gts.size(); ++g) {
          if (ignored[g]) gt_order.push_back(g);
        }
        for (std::size_t t = 0; t < n_t; ++t) {
          const auto match = greedy_match(cell.ious, gt_order, ignored, thresholds[t]);
          for (std::size_t r = 0; r < cell.dets.size(); ++r) {
            const Detection& d = dets[cell.dets[r]];
            bool skip = false;
            if (match[r] != kNoMatch) {
              skip = ignored[match[r]];
            } else {
              skip = !in_range(area(d.box), kRanges[a]);
            }
            if (!skip) ranked[t].emplace_back(d.score, match[r] != kNoMatch);
          }
        }
      }
      if (n_pos == 0) continue;
      for (std::size_t t = 0; t < n_t; ++t) {
        std::stable_sort(ranked[t].begin(), ranked[t].end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        const auto flags = std::make_unique<bool[]>(ranked[t].size());
        for (std::size_t i = 0; i < ranked[t].size(); ++i) flags[i] = ranked[t][i].second;
        curves[a][t][k] = interpolated_precision(std::span<const bool>(flags.get(), ranked[t].size()),
                                                 n_pos, grid);
      }
    }
  }

  // Mean over every defined (threshold, category, recall) entry.
  const auto summarize = [&](std::size_t a, std::optional<std::size_t> only_t) -> std::optional<double> {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < n_t; ++t) {
      if (only_t && *only_t != t) continue;
      for (const Curve& c : curves[a][t]) {
        if (!c) continue;
        for (double v : *c) sum += v;
        count += c->size();
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  };

  EvalReport report;
  report.iou_thresholds = thresholds;
  report.ap = summarize(0, std::nullopt);
  report.ap50 = summarize(0, 0);
  report.ap75 = summarize(0, 5);
  report.ap_s = summarize(1, std::nullopt);
  report.ap_m = summarize(2, std::nullopt);
  report.ap_l = summarize(3, std::nullopt);
  for (std::size_t t = 0; t < n_t; ++t) {
    report.ap_per_threshold.push_back(summarize(0, t));
    PrCurve curve;
    curve.iou_threshold = thresholds[t];
    curve.recall = grid;
    std::size_t defined = 0;
    std::vector<double> acc(grid.size(), 0.0);
    for (const Curve& c : curves[0][t]) {
      if (!c) continue;
      ++defined;
      for (std::size_t r = 0; r < grid.size(); ++r) acc[r] += (*c)[r];
    }
    if (defined > 0) {
      for (double& v : acc) v /= static_cast<double>(defined);
      curve.precision = std::move(acc);
    }
    report.curves.push_back(std::move(curve));
  }
  return report;
}

}  // namespace detkit::metrics

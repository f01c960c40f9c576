#include "detkit/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>

#include "detkit/errors.hpp"
#include "detkit/json_io.hpp"

namespace detkit::dataio {

const ImageInfo* DatasetIndex::find_image(ImageId id) const noexcept {
  const auto it = std::find_if(images.begin(), images.end(), [id](const ImageInfo& i) { return i.id == id; });
  return it == images.end() ? nullptr : &*it;
}

std::vector<metrics::GroundTruth> DatasetIndex::ground_truth() const {
  std::vector<metrics::GroundTruth> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) out.push_back({a.image_id, a.bbox, a.category_id});
  return out;
}

std::vector<ImageId> DatasetIndex::image_ids() const {
  std::vector<ImageId> out;
  out.reserve(images.size());
  for (const auto& i : images) out.push_back(i.id);
  return out;
}

DatasetIndex load_coco(const std::filesystem::path& path, const CocoOptions& options,
                       std::vector<std::string>* warnings) {
  return coco_from_json(read_json_file(path), options, warnings);
}

void save_coco(const std::filesystem::path& path, const DatasetIndex& index, const CocoOptions& options) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << dump(coco_to_json(index, options));
}

double area_ratio(const BBox& box, double image_w, double image_h) {
  if (!(image_w > 0.0 && image_h > 0.0)) throw DomainError("area_ratio: image dimensions must be positive");
  return std::clamp(area(box) / (image_w * image_h), 0.0, 1.0);
}

const std::vector<double>& default_ar_bins() {
  static const std::vector<double> bins{0.0, 0.001, 0.0025, 0.005, 0.01, 0.02, 0.05, 1.0};
  return bins;
}

StatsReport compute_stats(const DatasetIndex& index, std::span<const double> ar_bins, double small_threshold) {
  if (ar_bins.size() < 2) throw DomainError("compute_stats: need at least two bin edges");
  for (std::size_t i = 1; i < ar_bins.size(); ++i) {
    if (!(ar_bins[i] > ar_bins[i - 1])) throw DomainError("compute_stats: bin edges must be strictly increasing");
  }

  StatsReport s;
  s.n_images = index.images.size();
  s.n_instances = index.annotations.size();
  s.small_threshold = small_threshold;
  s.ar_bin_edges.assign(ar_bins.begin(), ar_bins.end());
  s.ar_counts.assign(ar_bins.size() - 1, 0);

  std::unordered_map<ImageId, std::size_t> row;
  std::vector<std::size_t> per_image(index.images.size(), 0);
  for (std::size_t i = 0; i < index.images.size(); ++i) row.emplace(index.images[i].id, i);

  std::size_t small = 0;
  s.ar_values.reserve(index.annotations.size());
  for (const auto& a : index.annotations) {
    const auto it = row.find(a.image_id);
    if (it == row.end()) throw InputError("compute_stats: annotation " + std::to_string(a.id) + " has no image");
    ++per_image[it->second];
    const ImageInfo& img = index.images[it->second];
    const double ar = area_ratio(a.bbox, static_cast<double>(img.width), static_cast<double>(img.height));
    s.ar_values.push_back(ar);
    if (ar <= small_threshold) ++small;

    if (ar < ar_bins.front()) {
      ++s.ar_below;
    } else if (ar > ar_bins.back()) {
      ++s.ar_above;
    } else {
      // First edge strictly above ar, minus one; the top edge folds into the last bin.
      auto bin = static_cast<std::size_t>(std::upper_bound(ar_bins.begin(), ar_bins.end(), ar) - ar_bins.begin()) - 1;
      ++s.ar_counts[std::min(bin, s.ar_counts.size() - 1)];
    }
  }
  for (std::size_t n : per_image) ++s.instances_per_image[n];
  if (s.n_instances > 0) s.small_fraction = static_cast<double>(small) / static_cast<double>(s.n_instances);
  return s;
}

std::pair<DatasetIndex, DatasetIndex> patient_split(const DatasetIndex& index, double train_fraction,
                                                    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("patient_split: train_fraction must lie in (0, 1)");
  }
  // Patient keys: "p:<id>" for labelled images, "i:<image id>" otherwise.
  std::map<std::string, std::vector<std::size_t>> patients;
  for (std::size_t i = 0; i < index.images.size(); ++i) {
    const auto& img = index.images[i];
    const std::string key = img.patient_id ? "p:" + *img.patient_id : "i:" + std::to_string(img.id);
    patients[key].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [key, images] : patients) order.push_back(&images);

  // Fisher-Yates with the portable generator; std::shuffle's algorithm is unspecified.
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  }

  const double target = train_fraction * static_cast<double>(index.images.size());
  std::vector<bool> in_train(index.images.size(), false);
  std::size_t train_count = 0;
  for (const auto* images : order) {
    if (static_cast<double>(train_count) >= target) break;
    for (std::size_t i : *images) in_train[i] = true;
    train_count += images->size();
  }

  std::pair<DatasetIndex, DatasetIndex> out;
  out.first.categories = index.categories;
  out.second.categories = index.categories;
  std::set<ImageId> train_ids;
  for (std::size_t i = 0; i < index.images.size(); ++i) {
    (in_train[i] ? out.first : out.second).images.push_back(index.images[i]);
    if (in_train[i]) train_ids.insert(index.images[i].id);
  }
  for (const auto& a : index.annotations) {
    (train_ids.count(a.image_id) ? out.first : out.second).annotations.push_back(a);
  }
  return out;
}

std::vector<BBox> regress_toward_nearest(std::span<const BBox> anchors, std::span<const BBox> gts, double step,
                                         double noise, Rng& rng) {
  std::vector<BBox> out;
  out.reserve(anchors.size());
  for (const BBox& a : anchors) {
    BBox r = a;
    if (!gts.empty()) {
      const double ax = a.x + 0.5 * a.w;
      const double ay = a.y + 0.5 * a.h;
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < gts.size(); ++j) {
        const double dx = gts[j].x + 0.5 * gts[j].w - ax;
        const double dy = gts[j].y + 0.5 * gts[j].h - ay;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      const BBox& g = gts[best];
      r.x = a.x + step * (g.x - a.x);
      r.y = a.y + step * (g.y - a.y);
      r.w = a.w + step * (g.w - a.w);
      r.h = a.h + step * (g.h - a.h);
    }
    const double nx = rng.uniform(-1.0, 1.0);
    const double ny = rng.uniform(-1.0, 1.0);
    const double nw = rng.uniform(-1.0, 1.0);
    const double nh = rng.uniform(-1.0, 1.0);
    if (noise > 0.0) {
      r.x += noise * nx * a.w;
      r.y += noise * ny * a.h;
      r.w = std::max(0.0, r.w + noise * nw * a.w);
      r.h = std::max(0.0, r.h + noise * nh * a.h);
    }
    out.push_back(r);
  }
  return out;
}

Scenario synth_scenario(const SynthSpec& spec) {
  const auto check = [](bool ok, const char* msg) {
    if (!ok) throw DomainError(std::string("synth_scenario: ") + msg);
  };
  check(std::isfinite(spec.image_w) && std::isfinite(spec.image_h) && spec.image_w > 0.0 && spec.image_h > 0.0,
        "image dimensions must be positive");
  check(spec.gt_min > 0.0 && spec.gt_min <= spec.gt_max, "GT size range must satisfy 0 < min <= max");
  check(spec.gt_max <= spec.image_w && spec.gt_max <= spec.image_h, "GT size range exceeds the image");
  check(std::isfinite(spec.noise) && spec.noise >= 0.0, "noise must be >= 0");
  check(spec.anchor_size >= 0.0 && std::isfinite(spec.anchor_size), "anchor_size must be >= 0");
  check(spec.jitter >= 0.0 && spec.jitter <= 0.5, "jitter must lie in [0, 0.5]");
  check(spec.regression_step >= 0.0 && spec.regression_step <= 1.0, "regression_step must lie in [0, 1]");

  Rng rng(spec.seed);
  Scenario s;
  s.gts.reserve(spec.n_gts);
  for (std::size_t j = 0; j < spec.n_gts; ++j) {
    const double w = rng.uniform(spec.gt_min, spec.gt_max);
    const double h = rng.uniform(spec.gt_min, spec.gt_max);
    const double x = rng.uniform(0.0, spec.image_w - w);
    const double y = rng.uniform(0.0, spec.image_h - h);
    s.gts.push_back({x, y, w, h});
  }

  if (spec.n_anchors > 0) {
    const double n = static_cast<double>(spec.n_anchors);
    const auto cols = static_cast<std::size_t>(std::max(1.0, std::ceil(std::sqrt(n * spec.image_w / spec.image_h))));
    const std::size_t rows = (spec.n_anchors + cols - 1) / cols;
    const double cell_w = spec.image_w / static_cast<double>(cols);
    const double cell_h = spec.image_h / static_cast<double>(rows);
    const double side = spec.anchor_size > 0.0 ? spec.anchor_size : 0.5 * (spec.gt_min + spec.gt_max);
    s.anchors.reserve(spec.n_anchors);
    for (std::size_t i = 0; i < spec.n_anchors; ++i) {
      const double cx = (static_cast<double>(i % cols) + 0.5 + spec.jitter * rng.uniform(-1.0, 1.0)) * cell_w;
      const double cy = (static_cast<double>(i / cols) + 0.5 + spec.jitter * rng.uniform(-1.0, 1.0)) * cell_h;
      s.anchors.push_back({cx - 0.5 * side, cy - 0.5 * side, side, side});
    }
  }
  s.regressed = regress_toward_nearest(s.anchors, s.gts, spec.regression_step, spec.noise, rng);
  return s;
}

DatasetIndex scenario_dataset(const Scenario& scenario, const SynthSpec& spec) {
  DatasetIndex index;
  index.images.push_back({1, static_cast<std::int64_t>(std::ceil(spec.image_w)),
                          static_cast<std::int64_t>(std::ceil(spec.image_h)), "synthetic.png", std::nullopt});
  index.categories.push_back({1, "lesion"});
  for (std::size_t j = 0; j < scenario.gts.size(); ++j) {
    index.annotations.push_back({static_cast<std::int64_t>(j + 1), 1, 1, scenario.gts[j]});
  }
  return index;
}

std::vector<metrics::Detection> scenario_detections(const Scenario& scenario) {
  std::vector<metrics::Detection> out;
  out.reserve(scenario.regressed.size());
  const BoxSet gt_set(scenario.gts);
  std::vector<double> row(gt_set.size());
  for (const BBox& r : scenario.regressed) {
    double best = 0.0;
    if (!gt_set.empty()) {
      iou_row(r, gt_set, row);
      best = *std::max_element(row.begin(), row.end());
    }
    out.push_back({1, r, best, 1});
  }
  return out;
}

}  // namespace detkit::dataio

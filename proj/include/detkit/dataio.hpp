#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detkit/geometry.hpp"
#include "detkit/metrics.hpp"
#include "detkit/random.hpp"

namespace detkit::dataio {

using metrics::CategoryId;
using metrics::ImageId;

struct ImageInfo {
  ImageId id = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::string file_name;
  std::optional<std::string> patient_id;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct Annotation {
  std::int64_t id = 0;
  ImageId image_id = 0;
  CategoryId category_id = 0;
  BBox bbox;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Category {
  CategoryId id = 0;
  std::string name;

  friend bool operator==(const Category&, const Category&) = default;
};

/// In-memory COCO annotation file.
struct DatasetIndex {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;

  const ImageInfo* find_image(ImageId id) const noexcept;
  std::vector<metrics::GroundTruth> ground_truth() const;
  std::vector<ImageId> image_ids() const;

  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

struct CocoOptions {
  /// Per-image field holding the patient identifier (string or integer).
  std::string patient_field = "patient_id";
};

/// Throws InputError on malformed JSON, missing required fields, duplicate
/// image ids or annotations that reference an unknown image. Boxes that
/// leave their image produce a warning, not an error.
DatasetIndex load_coco(const std::filesystem::path& path, const CocoOptions& options = {},
                       std::vector<std::string>* warnings = nullptr);
void save_coco(const std::filesystem::path& path, const DatasetIndex& index,
               const CocoOptions& options = {});

/// Box area over image area, clamped to [0, 1]. Throws DomainError unless
/// both image dimensions are positive.
double area_ratio(const BBox& box, double image_w, double image_h);

inline constexpr double kSmallAreaRatio = 0.005;

const std::vector<double>& default_ar_bins();

struct StatsReport {
  std::size_t n_images = 0;
  std::size_t n_instances = 0;
  /// annotation count -> number of images with that count
  std::map<std::size_t, std::size_t> instances_per_image;
  std::vector<double> ar_values;
  std::vector<double> ar_bin_edges;
  /// counts[i] covers [edge[i], edge[i+1]); the last bin also holds its upper edge.
  std::vector<std::size_t> ar_counts;
  std::size_t ar_below = 0;
  std::size_t ar_above = 0;
  double small_threshold = kSmallAreaRatio;
  /// Fraction of annotations with AR <= small_threshold; unset when there are none.
  std::optional<double> small_fraction;
};

/// Throws DomainError unless `ar_bins` has at least two strictly increasing edges.
StatsReport compute_stats(const DatasetIndex& index, std::span<const double> ar_bins,
                          double small_threshold = kSmallAreaRatio);

/// Splits by patient so no patient has images on both sides. Patients are
/// shuffled with `seed`, then handed to train until it holds at least
/// train_fraction of the images. Images without a patient id are their own
/// patient.
std::pair<DatasetIndex, DatasetIndex> patient_split(const DatasetIndex& index, double train_fraction,
                                                    std::uint64_t seed);

struct SynthSpec {
  std::size_t n_anchors = 0;
  std::size_t n_gts = 0;
  double image_w = 1333.0;
  double image_h = 800.0;
  double gt_min = 8.0;   // side length range of sampled GT boxes
  double gt_max = 96.0;
  double noise = 0.1;
  std::uint64_t seed = 0;
  double anchor_size = 0.0;      // 0: midpoint of the GT side range
  double jitter = 0.25;          // fraction of a grid cell
  double regression_step = 0.5;  // fraction of the way to the nearest GT
};

struct Scenario {
  std::vector<BBox> anchors;
  std::vector<BBox> regressed;
  std::vector<BBox> gts;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Throws DomainError when the requested scenario is infeasible.
Scenario synth_scenario(const SynthSpec& spec);

/// Moves each box `step` of the way toward its nearest GT (by centre
/// distance, lowest index on ties), then adds uniform noise scaled by the
/// box size. With no GTs only the noise is applied.
std::vector<BBox> regress_toward_nearest(std::span<const BBox> anchors, std::span<const BBox> gts,
                                         double step, double noise, Rng& rng);

/// The scenario's GTs as a single-image, single-category dataset (image id 1,
/// category id 1).
DatasetIndex scenario_dataset(const Scenario& scenario, const SynthSpec& spec);

/// Regressed boxes as detections on image 1, scored by their best IoU with
/// any GT.
std::vector<metrics::Detection> scenario_detections(const Scenario& scenario);

}  // namespace detkit::dataio

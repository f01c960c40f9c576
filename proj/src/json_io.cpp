#include "detkit/json_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object()) throw InputError(what + ": expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(what + ": missing field '" + key + "'");
  return *it;
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw InputError(what + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(what + ": value is not finite");
  return v;
}

std::int64_t integer(const Json& j, const std::string& what) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
      return static_cast<std::int64_t>(v);
    }
  }
  throw InputError(what + ": expected an integer");
}

std::size_t count(const Json& j, const std::string& what) {
  const auto v = integer(j, what);
  if (v <= 0) throw InputError(what + ": expected a positive integer");
  return static_cast<std::size_t>(v);
}

std::vector<double> numbers(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string patient_string(const Json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  throw InputError(what + ": patient id must be a string or integer");
}

}  // namespace

Json read_json(std::istream& in, const std::string& source) {
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(source + ": invalid JSON: " + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_json(in, path.string());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json bbox_to_json(const BBox& b) { return Json::array({b.x, b.y, b.w, b.h}); }

BBox bbox_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw InputError(what + ": bbox must be [x, y, w, h]");
  const BBox b{number(j[0], what), number(j[1], what), number(j[2], what), number(j[3], what)};
  if (b.w < 0.0 || b.h < 0.0) throw InputError(what + ": bbox width and height must be >= 0");
  return b;
}

Json boxes_to_json(std::span<const BBox> boxes) {
  Json out = Json::array();
  for (const BBox& b : boxes) out.push_back(bbox_to_json(b));
  return out;
}

std::vector<BBox> boxes_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array of boxes");
  std::vector<BBox> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(bbox_from_json(j[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

Json feature_map_to_json(const FeatureMap& map) {
  Json j;
  j["channels"] = map.channels();
  j["height"] = map.height();
  j["width"] = map.width();
  j["data"] = Json(std::vector<double>(map.data().begin(), map.data().end()));
  return j;
}

FeatureMap feature_map_from_json(const Json& j) {
  const std::string what = "feature map";
  const auto c = count(field(j, "channels", what), what + ".channels");
  const auto h = count(field(j, "height", what), what + ".height");
  const auto w = count(field(j, "width", what), what + ".width");
  auto data = numbers(field(j, "data", what), what + ".data");
  if (data.size() != c * h * w) {
    throw InputError(what + ": data has " + std::to_string(data.size()) + " values, header says " +
                     std::to_string(c * h * w));
  }
  return FeatureMap(c, h, w, std::move(data));
}

Json conv_to_json(const Conv1x1Params& p) {
  Json weight = Json::array();
  for (std::size_t o = 0; o < p.out_channels; ++o) {
    Json row = Json::array();
    for (std::size_t c = 0; c < p.in_channels; ++c) row.push_back(p.w(o, c));
    weight.push_back(std::move(row));
  }
  Json j;
  j["out_channels"] = p.out_channels;
  j["in_channels"] = p.in_channels;
  j["weight"] = std::move(weight);
  j["bias"] = p.bias;
  return j;
}

Conv1x1Params conv_from_json(const Json& j, const std::string& what) {
  Conv1x1Params p;
  p.out_channels = count(field(j, "out_channels", what), what + ".out_channels");
  p.in_channels = count(field(j, "in_channels", what), what + ".in_channels");
  const Json& rows = field(j, "weight", what);
  if (!rows.is_array() || rows.size() != p.out_channels) {
    throw InputError(what + ".weight: expected " + std::to_string(p.out_channels) + " rows");
  }
  for (std::size_t o = 0; o < rows.size(); ++o) {
    const auto row = numbers(rows[o], what + ".weight[" + std::to_string(o) + "]");
    if (row.size() != p.in_channels) {
      throw InputError(what + ".weight: each row needs " + std::to_string(p.in_channels) + " values");
    }
    p.weight.insert(p.weight.end(), row.begin(), row.end());
  }
  p.bias = numbers(field(j, "bias", what), what + ".bias");
  if (p.bias.size() != p.out_channels) throw InputError(what + ".bias: wrong length");
  return p;
}

Json bn_to_json(const BNParams& p) {
  Json j;
  j["scale"] = p.scale;
  j["shift"] = p.shift;
  j["running_mean"] = p.running_mean;
  j["running_var"] = p.running_var;
  j["eps"] = p.eps;
  return j;
}

BNParams bn_from_json(const Json& j, const std::string& what) {
  BNParams p;
  p.scale = numbers(field(j, "scale", what), what + ".scale");
  p.shift = numbers(field(j, "shift", what), what + ".shift");
  p.running_mean = numbers(field(j, "running_mean", what), what + ".running_mean");
  p.running_var = numbers(field(j, "running_var", what), what + ".running_var");
  p.eps = number(field(j, "eps", what), what + ".eps");
  return p;
}

Json bda_params_to_json(const bda::Params& p) {
  Json j;
  j["conv_z"] = conv_to_json(p.conv_z);
  j["conv_proj"] = conv_to_json(p.conv_proj);
  j["bn_proj"] = bn_to_json(p.bn_proj);
  j["conv_scene"] = conv_to_json(p.conv_scene);
  return j;
}

bda::Params bda_params_from_json(const Json& j) {
  const std::string what = "bda params";
  bda::Params p;
  p.conv_z = conv_from_json(field(j, "conv_z", what), "conv_z");
  p.conv_proj = conv_from_json(field(j, "conv_proj", what), "conv_proj");
  p.bn_proj = bn_from_json(field(j, "bn_proj", what), "bn_proj");
  p.conv_scene = conv_from_json(field(j, "conv_scene", what), "conv_scene");
  return p;
}

Json grad_report_to_json(const bda::GradCheckReport& r) {
  Json j;
  j["max_rel_error"] = r.max_rel_error;
  j["pass"] = r.pass;
  j["probes"] = r.probes;
  return j;
}

Json config_to_json(const idc::AssignmentConfig& cfg) {
  Json j;
  j["lambda"] = cfg.lambda_exp;
  j["alpha0"] = cfg.alpha0;
  j["gamma"] = cfg.gamma_exp;
  j["area_scale"] = cfg.area_scale;
  j["floor"] = cfg.floor;
  j["base"] = cfg.base;
  j["slope"] = cfg.slope;
  return j;
}

idc::AssignmentConfig config_from_json(const Json& j, idc::AssignmentConfig cfg) {
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  const auto read = [&](const char* key, double& dst) {
    if (const auto it = j.find(key); it != j.end()) dst = number(*it, std::string("config.") + key);
  };
  read("lambda", cfg.lambda_exp);
  read("alpha0", cfg.alpha0);
  read("gamma", cfg.gamma_exp);
  read("area_scale", cfg.area_scale);
  read("floor", cfg.floor);
  read("base", cfg.base);
  read("slope", cfg.slope);
  return cfg;
}

Json assignment_to_json(const idc::AssignmentResult& r) {
  Json anchors = Json::array();
  for (std::size_t i = 0; i < r.size(); ++i) {
    Json a;
    a["label"] = r.labels[i] == idc::Label::positive ? "positive" : "negative";
    a["matched_gt"] = r.matched_gt[i] ? Json(*r.matched_gt[i]) : Json(nullptr);
    a["diou"] = finite_or_null(r.diou[i]);
    a["threshold"] = finite_or_null(r.threshold_used[i]);
    anchors.push_back(std::move(a));
  }
  Json j;
  j["alpha"] = r.alpha;
  j["num_anchors"] = r.size();
  j["num_positive"] = r.num_positive();
  j["gt_thresholds"] = r.gt_thresholds;
  j["anchors"] = std::move(anchors);
  return j;
}

Json detections_to_json(std::span<const metrics::Detection> dets) {
  Json out = Json::array();
  for (const auto& d : dets) {
    Json j;
    j["image_id"] = d.image_id;
    j["category_id"] = d.category;
    j["bbox"] = bbox_to_json(d.box);
    j["score"] = d.score;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<metrics::Detection> detections_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("detections: expected a JSON array");
  std::vector<metrics::Detection> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string what = "detections[" + std::to_string(i) + "]";
    metrics::Detection d;
    d.image_id = integer(field(j[i], "image_id", what), what + ".image_id");
    d.category = integer(field(j[i], "category_id", what), what + ".category_id");
    d.box = bbox_from_json(field(j[i], "bbox", what), what + ".bbox");
    d.score = number(field(j[i], "score", what), what + ".score");
    if (d.score < 0.0 || d.score > 1.0) throw InputError(what + ".score: must lie in [0, 1]");
    out.push_back(d);
  }
  return out;
}

Json report_to_json(const metrics::EvalReport& r, bool include_curves) {
  Json j;
  j["ap"] = optional_number(r.ap);
  j["ap50"] = optional_number(r.ap50);
  j["ap75"] = optional_number(r.ap75);
  j["ap_s"] = optional_number(r.ap_s);
  j["ap_m"] = optional_number(r.ap_m);
  j["ap_l"] = optional_number(r.ap_l);
  Json per = Json::array();
  for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
    Json e;
    e["iou_threshold"] = r.iou_thresholds[t];
    e["ap"] = optional_number(r.ap_per_threshold[t]);
    per.push_back(std::move(e));
  }
  j["per_threshold"] = std::move(per);
  if (include_curves) {
    Json curves = Json::array();
    for (const auto& c : r.curves) {
      Json e;
      e["iou_threshold"] = c.iou_threshold;
      e["recall"] = c.recall;
      e["precision"] = c.precision.empty() ? Json(nullptr) : Json(c.precision);
      curves.push_back(std::move(e));
    }
    j["pr_curves"] = std::move(curves);
  }
  return j;
}

std::string curves_to_csv(const metrics::EvalReport& r) {
  std::ostringstream out;
  out << "iou_threshold,recall,precision\n";
  for (const auto& c : r.curves) {
    if (c.precision.empty()) continue;
    for (std::size_t i = 0; i < c.recall.size(); ++i) {
      out << Json(c.iou_threshold).dump() << ',' << Json(c.recall[i]).dump() << ','
          << Json(c.precision[i]).dump() << '\n';
    }
  }
  return out.str();
}

Json coco_to_json(const dataio::DatasetIndex& index, const dataio::CocoOptions& options) {
  Json images = Json::array();
  for (const auto& img : index.images) {
    Json j;
    j["id"] = img.id;
    j["width"] = img.width;
    j["height"] = img.height;
    if (!img.file_name.empty()) j["file_name"] = img.file_name;
    if (img.patient_id) j[options.patient_field] = *img.patient_id;
    images.push_back(std::move(j));
  }
  Json annotations = Json::array();
  for (const auto& a : index.annotations) {
    Json j;
    j["id"] = a.id;
    j["image_id"] = a.image_id;
    j["category_id"] = a.category_id;
    j["bbox"] = bbox_to_json(a.bbox);
    j["area"] = area(a.bbox);
    j["iscrowd"] = 0;
    annotations.push_back(std::move(j));
  }
  Json categories = Json::array();
  for (const auto& c : index.categories) {
    Json j;
    j["id"] = c.id;
    j["name"] = c.name;
    categories.push_back(std::move(j));
  }
  Json j;
  j["images"] = std::move(images);
  j["annotations"] = std::move(annotations);
  j["categories"] = std::move(categories);
  return j;
}

dataio::DatasetIndex coco_from_json(const Json& j, const dataio::CocoOptions& options,
                                    std::vector<std::string>* warnings) {
  const std::string what = "coco";
  if (!j.is_object()) throw InputError("coco: top level must be a JSON object");
  dataio::DatasetIndex index;

  const Json& images = field(j, "images", what);
  if (!images.is_array()) throw InputError("coco.images: expected an array");
  std::set<dataio::ImageId> seen;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string w = "images[" + std::to_string(i) + "]";
    const Json& e = images[i];
    dataio::ImageInfo img;
    img.id = integer(field(e, "id", w), w + ".id");
    img.width = integer(field(e, "width", w), w + ".width");
    img.height = integer(field(e, "height", w), w + ".height");
    if (img.width <= 0 || img.height <= 0) throw InputError(w + ": width and height must be positive");
    if (const auto it = e.find("file_name"); it != e.end() && it->is_string()) {
      img.file_name = it->get<std::string>();
    }
    if (const auto it = e.find(options.patient_field); it != e.end() && !it->is_null()) {
      img.patient_id = patient_string(*it, w + "." + options.patient_field);
    }
    if (!seen.insert(img.id).second) throw InputError(w + ": duplicate image id " + std::to_string(img.id));
    index.images.push_back(std::move(img));
  }

  if (const auto it = j.find("categories"); it != j.end()) {
    if (!it->is_array()) throw InputError("coco.categories: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string w = "categories[" + std::to_string(i) + "]";
      const Json& e = (*it)[i];
      dataio::Category c;
      c.id = integer(field(e, "id", w), w + ".id");
      if (const auto n = e.find("name"); n != e.end() && n->is_string()) c.name = n->get<std::string>();
      index.categories.push_back(std::move(c));
    }
  }

  if (const auto it = j.find("annotations"); it != j.end()) {
    if (!it->is_array()) throw InputError("coco.annotations: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string w = "annotations[" + std::to_string(i) + "]";
      const Json& e = (*it)[i];
      dataio::Annotation a;
      a.id = integer(field(e, "id", w), w + ".id");
      a.image_id = integer(field(e, "image_id", w), w + ".image_id");
      a.category_id = integer(field(e, "category_id", w), w + ".category_id");
      a.bbox = bbox_from_json(field(e, "bbox", w), w + ".bbox");
      const dataio::ImageInfo* img = index.find_image(a.image_id);
      if (img == nullptr) {
        throw InputError(w + ": references missing image id " + std::to_string(a.image_id));
      }
      const double eps = 1e-9;
      if (warnings && (a.bbox.x < -eps || a.bbox.y < -eps ||
                       a.bbox.x + a.bbox.w > static_cast<double>(img->width) + eps ||
                       a.bbox.y + a.bbox.h > static_cast<double>(img->height) + eps)) {
        warnings->push_back(w + " (id " + std::to_string(a.id) + "): bbox extends outside image " +
                            std::to_string(img->id));
      }
      index.annotations.push_back(a);
    }
  }
  return index;
}

Json stats_to_json(const dataio::StatsReport& s, bool include_values) {
  Json per_image = Json::array();
  for (const auto& [n, images] : s.instances_per_image) {
    Json e;
    e["instances"] = n;
    e["images"] = images;
    per_image.push_back(std::move(e));
  }
  Json j;
  j["n_images"] = s.n_images;
  j["n_instances"] = s.n_instances;
  j["instances_per_image"] = std::move(per_image);
  j["ar_bin_edges"] = s.ar_bin_edges;
  j["ar_counts"] = s.ar_counts;
  j["ar_below_range"] = s.ar_below;
  j["ar_above_range"] = s.ar_above;
  j["small_threshold"] = s.small_threshold;
  j["small_fraction"] = optional_number(s.small_fraction);
  if (include_values) j["ar_values"] = s.ar_values;
  return j;
}

std::string stats_to_csv(const dataio::StatsReport& s) {
  std::ostringstream out;
  out << "bin_edge,count\n";
  for (std::size_t i = 0; i < s.ar_counts.size(); ++i) {
    out << Json(s.ar_bin_edges[i]).dump() << ',' << s.ar_counts[i] << '\n';
  }
  return out.str();
}

Json synth_spec_to_json(const dataio::SynthSpec& spec) {
  Json j;
  j["n_anchors"] = spec.n_anchors;
  j["n_gts"] = spec.n_gts;
  j["image_w"] = spec.image_w;
  j["image_h"] = spec.image_h;
  j["gt_size_range"] = Json::array({spec.gt_min, spec.gt_max});
  j["noise"] = spec.noise;
  j["seed"] = spec.seed;
  j["anchor_size"] = spec.anchor_size;
  j["jitter"] = spec.jitter;
  j["regression_step"] = spec.regression_step;
  return j;
}

Json scenario_to_json(const dataio::Scenario& s) {
  Json j;
  j["anchors"] = boxes_to_json(s.anchors);
  j["regressed"] = boxes_to_json(s.regressed);
  j["gts"] = boxes_to_json(s.gts);
  return j;
}

dataio::Scenario scenario_from_json(const Json& j) {
  const std::string what = "scenario";
  dataio::Scenario s;
  s.anchors = boxes_from_json(field(j, "anchors", what), "anchors");
  s.regressed = boxes_from_json(field(j, "regressed", what), "regressed");
  s.gts = boxes_from_json(field(j, "gts", what), "gts");
  return s;
}

}  // namespace detkit

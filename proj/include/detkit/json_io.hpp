#pragma once

// JSON encodings of every type that crosses the command-line boundary.
// Decoders throw InputError with the offending field named.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "detkit/bda.hpp"
#include "detkit/dataio.hpp"
#include "detkit/geometry.hpp"
#include "detkit/idc.hpp"
#include "detkit/metrics.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

using Json = nlohmann::ordered_json;

Json read_json(std::istream& in, const std::string& source);
Json read_json_file(const std::filesystem::path& path);

/// Two-space indented, trailing newline.
std::string dump(const Json& j);

Json bbox_to_json(const BBox& b);
BBox bbox_from_json(const Json& j, const std::string& what);
Json boxes_to_json(std::span<const BBox> boxes);
std::vector<BBox> boxes_from_json(const Json& j, const std::string& what);

Json feature_map_to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const Json& j);

Json conv_to_json(const Conv1x1Params& p);
Conv1x1Params conv_from_json(const Json& j, const std::string& what);
Json bn_to_json(const BNParams& p);
BNParams bn_from_json(const Json& j, const std::string& what);
Json bda_params_to_json(const bda::Params& p);
bda::Params bda_params_from_json(const Json& j);
Json grad_report_to_json(const bda::GradCheckReport& r);

Json config_to_json(const idc::AssignmentConfig& cfg);
/// Fields absent from `j` keep their value in `defaults`.
idc::AssignmentConfig config_from_json(const Json& j, idc::AssignmentConfig defaults = {});
Json assignment_to_json(const idc::AssignmentResult& r);

Json detections_to_json(std::span<const metrics::Detection> dets);
std::vector<metrics::Detection> detections_from_json(const Json& j);
Json report_to_json(const metrics::EvalReport& r, bool include_curves = true);
/// Rows iou_threshold,recall,precision.
std::string curves_to_csv(const metrics::EvalReport& r);

Json coco_to_json(const dataio::DatasetIndex& index, const dataio::CocoOptions& options = {});
dataio::DatasetIndex coco_from_json(const Json& j, const dataio::CocoOptions& options = {},
                                    std::vector<std::string>* warnings = nullptr);

Json stats_to_json(const dataio::StatsReport& s, bool include_values = false);
/// Rows bin_edge,count; bin_edge is the lower edge.
std::string stats_to_csv(const dataio::StatsReport& s);

Json synth_spec_to_json(const dataio::SynthSpec& spec);
Json scenario_to_json(const dataio::Scenario& s);
dataio::Scenario scenario_from_json(const Json& j);

}  // namespace detkit

#include "detkit/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "detkit/bda.hpp"
#include "detkit/dataio.hpp"
#include "detkit/errors.hpp"
#include "detkit/idc.hpp"
#include "detkit/json_io.hpp"
#include "detkit/metrics.hpp"
#include "detkit/tensor_io.hpp"

namespace detkit::cli {

namespace {

constexpr const char* kExitCodes =
    "Exit codes: 0 success, 2 usage error, 3 input/schema error, 4 numeric-domain error.";

struct Globals {
  std::string output;
  std::string format = "json";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

struct AssignArgs {
  std::string scenario;
  std::optional<double> progress, lambda, alpha0, gamma, area_scale;
};

struct EvaluateArgs {
  std::string gt, dets, pr_csv;
  std::optional<std::size_t> max_dets;
  bool no_curves = false;
};

struct StatsArgs {
  std::string gt;
  std::vector<double> bins = dataio::default_ar_bins();
  double small_threshold = dataio::kSmallAreaRatio;
  std::string patient_field = "patient_id";
  bool include_values = false;
};

struct SplitArgs {
  std::string gt, train_out, test_out;
  double train_fraction = 0.8;
  std::string patient_field = "patient_id";
};

struct SynthArgs {
  dataio::SynthSpec spec;
  double progress = 0.0;
  std::string coco_out, dets_out;
};

struct BdaArgs {
  std::string fixture, p_i, c5, params;
  bool random = false;
  std::vector<std::size_t> dims{4, 4, 2, 4, 4};
  double tolerance = 1e-5;
  double step = 1e-6;
};

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw InputError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
}

Json load_json(const std::string& path, std::istream& in) {
  if (path == "-") return read_json(in, "<stdin>");
  return read_json_file(path);
}

void do_assign(const AssignArgs& a, const Globals& g, std::ostream& out, std::istream& in) {
  const Json doc = load_json(a.scenario, in);
  const dataio::Scenario s = scenario_from_json(doc);
  idc::AssignmentConfig cfg;
  if (const auto it = doc.find("config"); it != doc.end()) cfg = config_from_json(*it, cfg);
  if (a.lambda) cfg.lambda_exp = *a.lambda;
  if (a.alpha0) cfg.alpha0 = *a.alpha0;
  if (a.gamma) cfg.gamma_exp = *a.gamma;
  if (a.area_scale) cfg.area_scale = *a.area_scale;
  double progress = 0.0;
  if (const auto it = doc.find("progress"); it != doc.end()) {
    if (!it->is_number()) throw InputError("scenario.progress: expected a number");
    progress = it->get<double>();
  }
  if (a.progress) progress = *a.progress;

  const auto r = idc::assign_labels(s.anchors, s.regressed, s.gts, progress, cfg);
  Output o(g.output, out);
  if (g.format == "csv") {
    *o << "anchor,label,matched_gt,diou,threshold\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
      *o << i << ',' << (r.labels[i] == idc::Label::positive ? "positive" : "negative") << ','
         << (r.matched_gt[i] ? std::to_string(*r.matched_gt[i]) : "") << ','
         << (r.matched_gt[i] ? Json(r.diou[i]).dump() : "") << ','
         << (r.matched_gt[i] ? Json(r.threshold_used[i]).dump() : "") << '\n';
    }
    return;
  }
  Json j;
  j["progress"] = progress;
  j["config"] = config_to_json(cfg);
  const Json extra = assignment_to_json(r);
  for (auto& [k, v] : extra.items()) j[k] = v;
  *o << dump(j);
}

void do_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
  const auto index = dataio::load_coco(a.gt);
  const auto dets = detections_from_json(read_json_file(a.dets));
  metrics::EvalOptions opts;
  opts.max_dets = a.max_dets;
  opts.image_ids = index.image_ids();
  const auto gts = index.ground_truth();
  const auto report = metrics::evaluate(dets, gts, opts);
  if (!a.pr_csv.empty()) write_text(a.pr_csv, curves_to_csv(report));
  Output o(g.output, out);
  if (g.format == "csv") {
    *o << curves_to_csv(report);
  } else {
    *o << dump(report_to_json(report, !a.no_curves));
  }
}

void do_stats(const StatsArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto index = dataio::load_coco(a.gt, {a.patient_field}, &warnings);
  for (const auto& w : warnings) {
    Json j;
    j["warning"] = w;
    err << j.dump() << '\n';
  }
  const auto stats = dataio::compute_stats(index, a.bins, a.small_threshold);
  Output o(g.output, out);
  if (g.format == "csv") {
    *o << stats_to_csv(stats);
  } else {
    Json j = stats_to_json(stats, a.include_values);
    j["warnings"] = warnings.size();
    *o << dump(j);
  }
}

void do_split(const SplitArgs& a, const Globals& g, std::ostream& out) {
  const dataio::CocoOptions opts{a.patient_field};
  const auto index = dataio::load_coco(a.gt, opts);
  const auto [train, test] = dataio::patient_split(index, a.train_fraction, g.seed);
  dataio::save_coco(a.train_out, train, opts);
  dataio::save_coco(a.test_out, test, opts);
  const auto patients = [](const dataio::DatasetIndex& idx) {
    std::set<std::string> p;
    for (const auto& img : idx.images) p.insert(img.patient_id ? "p:" + *img.patient_id : "i:" + std::to_string(img.id));
    return p.size();
  };
  Json j;
  j["seed"] = g.seed;
  j["train_fraction"] = a.train_fraction;
  j["train_images"] = train.images.size();
  j["test_images"] = test.images.size();
  j["train_annotations"] = train.annotations.size();
  j["test_annotations"] = test.annotations.size();
  j["train_patients"] = patients(train);
  j["test_patients"] = patients(test);
  Output o(g.output, out);
  *o << dump(j);
}

void do_synth(SynthArgs a, const Globals& g, std::ostream& out) {
  a.spec.seed = g.seed;
  const auto s = dataio::synth_scenario(a.spec);
  if (!a.coco_out.empty()) write_text(a.coco_out, dump(coco_to_json(dataio::scenario_dataset(s, a.spec))));
  if (!a.dets_out.empty()) write_text(a.dets_out, dump(detections_to_json(dataio::scenario_detections(s))));
  Json j;
  j["spec"] = synth_spec_to_json(a.spec);
  j["progress"] = a.progress;
  const Json extra = scenario_to_json(s);
  for (auto& [k, v] : extra.items()) j[k] = v;
  Output o(g.output, out);
  *o << dump(j);
}

void do_bda_check(const BdaArgs& a, const Globals& g, std::ostream& out) {
  FeatureMap p_i, c5;
  bda::Params params;
  std::string source;
  if (a.random) {
    if (a.dims.size() != 5) throw InputError("--dims expects C,C5,Cp,H,W");
    for (auto d : a.dims) {
      if (d == 0) throw InputError("--dims entries must be positive");
    }
    const std::size_t c = a.dims[0], c5c = a.dims[1], cp = a.dims[2], h = a.dims[3], w = a.dims[4];
    Rng rng(g.seed);
    params = bda::random_params(c, c5c, cp, rng);
    p_i = bda::random_map(c, h, w, rng);
    c5 = bda::random_map(c5c, (h + 1) / 2, (w + 1) / 2, rng);
    source = "random";
  } else if (!a.fixture.empty()) {
    const Json doc = read_json_file(a.fixture);
    if (!doc.is_object() || !doc.contains("p_i") || !doc.contains("c5") || !doc.contains("params")) {
      throw InputError(a.fixture + ": fixture needs p_i, c5 and params");
    }
    p_i = feature_map_from_json(doc["p_i"]);
    c5 = feature_map_from_json(doc["c5"]);
    params = bda_params_from_json(doc["params"]);
    source = a.fixture;
  } else {
    if (a.p_i.empty() || a.c5.empty() || a.params.empty()) {
      throw InputError("bda-check needs --random, --fixture, or all of --p-i, --c5, --params");
    }
    p_i = load_feature_map(a.p_i);
    c5 = load_feature_map(a.c5);
    params = bda_params_from_json(read_json_file(a.params));
    source = a.p_i;
  }
  bda::GradCheckOptions opts;
  opts.step = a.step;
  const auto report = bda::grad_check(p_i, c5, params, a.tolerance, opts);
  Json j;
  j["source"] = source;
  j["dims"] = {{"channels", p_i.channels()},
               {"scene_channels", c5.channels()},
               {"embed_channels", params.embed_channels()},
               {"height", p_i.height()},
               {"width", p_i.width()},
               {"scene_height", c5.height()},
               {"scene_width", c5.width()}};
  j["tolerance"] = a.tolerance;
  const Json extra = grad_report_to_json(report);
  for (auto& [k, v] : extra.items()) j[k] = v;
  Output o(g.output, out);
  *o << dump(j);
}

void report_error(std::ostream& err, int code, const char* kind, const std::string& message) {
  Json j;
  j["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Detection toolkit: label assignment, attention gradient checks, AP evaluation."};
  app.name("detkit");
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("-o,--output", g.output, "Write the result here instead of stdout");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--seed", g.seed, "Random seed");

  AssignArgs assign;
  auto* sub_assign = app.add_subcommand("assign", "Label anchors with adaptive thresholds and dynamic IoU");
  sub_assign->add_option("--scenario", assign.scenario, "Scenario JSON ('-' for stdin)")->required();
  sub_assign->add_option("--progress", assign.progress, "Training progress epoch/epochs in [0, 1]");
  sub_assign->add_option("--lambda", assign.lambda, "Threshold growth rate (default 0.55)");
  sub_assign->add_option("--alpha0", assign.alpha0, "Late-training anchor IoU weight (default 0.6)");
  sub_assign->add_option("--gamma", assign.gamma, "Disagreement penalty exponent (default 1.5)");
  sub_assign->add_option("--area-scale", assign.area_scale, "Threshold length scale in pixels (default 32)");

  EvaluateArgs eval;
  auto* sub_eval = app.add_subcommand("evaluate", "COCO-style AP of detections against annotations");
  sub_eval->add_option("--gt", eval.gt, "COCO annotation JSON")->required();
  sub_eval->add_option("--dets", eval.dets, "COCO results JSON")->required();
  sub_eval->add_option("--max-dets", eval.max_dets, "Cap detections per image and category");
  sub_eval->add_option("--pr-csv", eval.pr_csv, "Also write PR curves as CSV");
  sub_eval->add_flag("--no-curves", eval.no_curves, "Omit PR curves from the JSON report");

  StatsArgs stats;
  auto* sub_stats = app.add_subcommand("stats", "Instance counts and area-ratio histogram");
  sub_stats->add_option("--gt", stats.gt, "COCO annotation JSON")->required();
  sub_stats->add_option("--bins", stats.bins, "Area-ratio bin edges")->delimiter(',');
  sub_stats->add_option("--small-threshold", stats.small_threshold, "Area ratio counted as small");
  sub_stats->add_option("--patient-field", stats.patient_field, "Image field holding the patient id");
  sub_stats->add_flag("--include-values", stats.include_values, "List every annotation's area ratio");

  SplitArgs split;
  auto* sub_split = app.add_subcommand("split", "Patient-level train/test split");
  sub_split->add_option("--gt", split.gt, "COCO annotation JSON")->required();
  sub_split->add_option("--train-fraction", split.train_fraction, "Target share of images in train");
  sub_split->add_option("--train-out", split.train_out, "Train COCO JSON")->required();
  sub_split->add_option("--test-out", split.test_out, "Test COCO JSON")->required();
  sub_split->add_option("--patient-field", split.patient_field, "Image field holding the patient id");

  SynthArgs synth;
  auto* sub_synth = app.add_subcommand("synth", "Generate a synthetic anchor/GT scenario");
  sub_synth->add_option("--anchors", synth.spec.n_anchors, "Number of anchors");
  sub_synth->add_option("--gts", synth.spec.n_gts, "Number of GT boxes");
  sub_synth->add_option("--image-w", synth.spec.image_w, "Image width");
  sub_synth->add_option("--image-h", synth.spec.image_h, "Image height");
  sub_synth->add_option("--gt-min", synth.spec.gt_min, "Smallest GT side");
  sub_synth->add_option("--gt-max", synth.spec.gt_max, "Largest GT side");
  sub_synth->add_option("--noise", synth.spec.noise, "Regression noise, relative to anchor size");
  sub_synth->add_option("--anchor-size", synth.spec.anchor_size, "Anchor side (0: middle of GT range)");
  sub_synth->add_option("--jitter", synth.spec.jitter, "Anchor jitter as a fraction of a grid cell");
  sub_synth->add_option("--step", synth.spec.regression_step, "Fraction of the way regressed boxes move");
  sub_synth->add_option("--progress", synth.progress, "Progress value stored in the scenario");
  sub_synth->add_option("--coco-out", synth.coco_out, "Also write the GTs as COCO JSON");
  sub_synth->add_option("--dets-out", synth.dets_out, "Also write regressed boxes as COCO results");

  BdaArgs bda_args;
  auto* sub_bda = app.add_subcommand("bda-check", "Finite-difference check of the attention gradients");
  sub_bda->add_option("--fixture", bda_args.fixture, "JSON with p_i, c5 and params");
  sub_bda->add_option("--p-i", bda_args.p_i, "Feature map file (binary or JSON)");
  sub_bda->add_option("--c5", bda_args.c5, "Scene feature map file (binary or JSON)");
  sub_bda->add_option("--params", bda_args.params, "Parameter JSON");
  sub_bda->add_flag("--random", bda_args.random, "Use seeded random inputs");
  sub_bda->add_option("--dims", bda_args.dims, "C,C5,Cp,H,W for --random")->delimiter(',')->expected(5);
  sub_bda->add_option("--tolerance", bda_args.tolerance, "Pass when max relative error is below this");
  sub_bda->add_option("--step", bda_args.step, "Central difference step");

  for (auto* sub : app.get_subcommands({})) sub->footer(kExitCodes);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, kUsage, "usage", e.what());
    return kUsage;
  }

  try {
    if (*sub_assign) do_assign(assign, g, out, in);
    if (*sub_eval) do_evaluate(eval, g, out);
    if (*sub_stats) do_stats(stats, g, out, err);
    if (*sub_split) do_split(split, g, out);
    if (*sub_synth) do_synth(synth, g, out);
    if (*sub_bda) do_bda_check(bda_args, g, out);
  } catch (const InputError& e) {
    report_error(err, kInput, "input", e.what());
    return kInput;
  } catch (const DomainError& e) {
    report_error(err, kNumeric, "numeric", e.what());
    return kNumeric;
  } catch (const DimensionError& e) {
    report_error(err, kNumeric, "dimension", e.what());
    return kNumeric;
  }
  return kOk;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr, std::cin);
}

}  // namespace detkit::cli

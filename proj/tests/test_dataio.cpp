#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "detkit/dataio.hpp"
#include "detkit/errors.hpp"
#include "detkit/json_io.hpp"

namespace dio = detkit::dataio;
using detkit::BBox;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "detkit_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

dio::DatasetIndex random_dataset(detkit::Rng& rng) {
  dio::DatasetIndex ds;
  const std::size_t n_patients = 1 + rng.below(30);
  std::int64_t next_id = 1;
  for (std::size_t p = 0; p < n_patients; ++p) {
    const std::size_t n_img = 1 + rng.below(6);
    for (std::size_t k = 0; k < n_img; ++k) {
      dio::ImageInfo img{next_id++, 800, 600, "img.png", std::nullopt};
      if (rng.uniform() < 0.9) img.patient_id = "P" + std::to_string(p);
      ds.images.push_back(img);
    }
  }
  return ds;
}

std::string patient_key(const dio::ImageInfo& img) {
  return img.patient_id ? "p:" + *img.patient_id : "i:" + std::to_string(img.id);
}

}  // namespace

TEST_CASE("mt19937_64 reference vector") {
  detkit::Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("Rng helpers stay in range") {
  detkit::Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(7) < 7);
  }
}

TEST_CASE("load_coco minimal file") {
  const auto path = temp_file("minimal.json", R"({
    "images": [{"id": 3, "width": 100, "height": 50, "file_name": "a.png", "patient_id": 12}],
    "annotations": [{"id": 1, "image_id": 3, "category_id": 1, "bbox": [1, 2, 3, 4]}],
    "categories": [{"id": 1, "name": "lesion"}]})");
  const auto ds = dio::load_coco(path);
  REQUIRE(ds.images.size() == 1);
  CHECK(ds.images[0].patient_id == std::optional<std::string>("12"));
  REQUIRE(ds.annotations.size() == 1);
  CHECK(ds.annotations[0].bbox == BBox{1, 2, 3, 4});
  CHECK(ds.find_image(3) != nullptr);
  CHECK(ds.find_image(4) == nullptr);
  const auto gts = ds.ground_truth();
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].image_id == 3);
}

TEST_CASE("load_coco rejects an annotation on an unknown image") {
  const auto path = temp_file("orphan.json", R"({
    "images": [{"id": 1, "width": 10, "height": 10, "file_name": "a.png"}],
    "annotations": [{"id": 1, "image_id": 77, "category_id": 1, "bbox": [0, 0, 1, 1]}],
    "categories": [{"id": 1, "name": "x"}]})");
  try {
    dio::load_coco(path);
    FAIL("expected InputError");
  } catch (const detkit::InputError& e) {
    CHECK(std::string(e.what()).find("77") != std::string::npos);
  }
  CHECK_THROWS_AS(dio::load_coco(temp_file("broken.json", "{not json")), detkit::InputError);
  CHECK_THROWS_AS(dio::load_coco("/nonexistent/file.json"), detkit::InputError);
}

TEST_CASE("load_coco warns on boxes outside the image") {
  const auto path = temp_file("oob.json", R"({
    "images": [{"id": 1, "width": 10, "height": 10, "file_name": "a.png"}],
    "annotations": [{"id": 5, "image_id": 1, "category_id": 1, "bbox": [8, 8, 5, 5]}],
    "categories": [{"id": 1, "name": "x"}]})");
  std::vector<std::string> warnings;
  const auto ds = dio::load_coco(path, {}, &warnings);
  CHECK(ds.annotations.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("save_coco round trip") {
  const auto original = dio::load_coco(DETKIT_FIXTURE_DIR "/pycoco_gt.json");
  const auto dir = std::filesystem::temp_directory_path() / "detkit_tests";
  std::filesystem::create_directories(dir);
  dio::save_coco(dir / "roundtrip.json", original);
  CHECK(dio::load_coco(dir / "roundtrip.json") == original);
}

TEST_CASE("area_ratio") {
  const double ar = dio::area_ratio({0, 0, 80, 60}, 1333, 800);
  CHECK(std::abs(ar - 0.0045011252813203302) < 1e-15);
  CHECK(ar <= dio::kSmallAreaRatio);
  CHECK(dio::area_ratio({0, 0, 2000, 2000}, 100, 100) == 1.0);
  CHECK(dio::area_ratio({0, 0, 0, 5}, 100, 100) == 0.0);
  CHECK_THROWS_AS(dio::area_ratio({0, 0, 1, 1}, 0, 100), detkit::DomainError);
  CHECK_THROWS_AS(dio::area_ratio({0, 0, 1, 1}, 100, -1), detkit::DomainError);
}

TEST_CASE("compute_stats") {
  dio::DatasetIndex empty;
  empty.images.push_back({1, 100, 100, "a.png", std::nullopt});
  const auto e = dio::compute_stats(empty, dio::default_ar_bins());
  CHECK(e.n_instances == 0);
  CHECK_FALSE(e.small_fraction.has_value());
  CHECK(e.instances_per_image.at(0) == 1);

  auto one = empty;
  one.annotations.push_back({1, 1, 1, {0, 0, 5, 5}});
  const auto s = dio::compute_stats(one, dio::default_ar_bins());
  CHECK(*s.small_fraction == 1.0);

  const std::vector<double> bad{0.5, 0.1};
  CHECK_THROWS_AS(dio::compute_stats(one, bad), detkit::DomainError);
  const std::vector<double> single{0.5};
  CHECK_THROWS_AS(dio::compute_stats(one, single), detkit::DomainError);
}

TEST_CASE("compute_stats recovers a planted histogram") {
  // 1000 annotations on a 1000x1000 image; AR = side^2 / 1e6 chosen inside known bins.
  const std::vector<double> edges{0.0, 0.001, 0.01, 0.1, 1.0};
  const std::size_t planted[] = {100, 250, 400, 250};
  const double sides[] = {20.0, 50.0, 200.0, 500.0};
  dio::DatasetIndex ds;
  ds.images.push_back({1, 1000, 1000, "a.png", std::nullopt});
  std::int64_t id = 1;
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t k = 0; k < planted[b]; ++k) ds.annotations.push_back({id++, 1, 1, {0, 0, sides[b], sides[b]}});
  }
  const auto s = dio::compute_stats(ds, edges);
  REQUIRE(s.ar_counts.size() == 4);
  for (std::size_t b = 0; b < 4; ++b) CHECK(s.ar_counts[b] == planted[b]);
  CHECK(s.n_instances == 1000);
  CHECK(s.instances_per_image.at(1000) == 1);
  CHECK(*s.small_fraction == doctest::Approx(0.35));

  // edges are half-open except the last
  dio::DatasetIndex edge;
  edge.images.push_back({1, 10, 10, "a.png", std::nullopt});
  edge.annotations.push_back({1, 1, 1, {0, 0, 10, 10}});
  const std::vector<double> halves{0.0, 0.5, 1.0};
  CHECK(dio::compute_stats(edge, halves).ar_counts[1] == 1);
  const std::vector<double> low{0.0, 0.5};
  const auto above = dio::compute_stats(edge, low);
  CHECK(above.ar_above == 1);
}

TEST_CASE("patient_split examples") {
  dio::DatasetIndex ds;
  for (int i = 0; i < 10; ++i) ds.images.push_back({i + 1, 10, 10, "a.png", "P" + std::to_string(i / 2)});
  ds.annotations.push_back({1, 3, 1, {0, 0, 1, 1}});
  const auto [train, test] = dio::patient_split(ds, 0.5, 11);
  CHECK(train.images.size() + test.images.size() == 10);
  CHECK(train.images.size() == 6);  // 3 patients of 2 reach 0.5 only after the third
  std::set<std::string> tp, sp;
  for (const auto& i : train.images) tp.insert(*i.patient_id);
  for (const auto& i : test.images) sp.insert(*i.patient_id);
  for (const auto& p : tp) CHECK(sp.count(p) == 0);
  CHECK(train.annotations.size() + test.annotations.size() == 1);

  dio::DatasetIndex solo;
  for (int i = 0; i < 4; ++i) solo.images.push_back({i + 1, 10, 10, "a.png", "only"});
  const auto [tr, te] = dio::patient_split(solo, 0.8, 0);
  CHECK(tr.images.size() == 4);
  CHECK(te.images.empty());

  CHECK_THROWS_AS(dio::patient_split(ds, 1.5, 0), detkit::DomainError);
}

TEST_CASE("patient_split soundness over random datasets") {
  detkit::Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ds = random_dataset(rng);
    const double frac = rng.uniform(0.05, 0.95);
    const auto [train, test] = dio::patient_split(ds, frac, rng.next_u64());
    std::set<std::string> a, b;
    for (const auto& i : train.images) a.insert(patient_key(i));
    for (const auto& i : test.images) b.insert(patient_key(i));
    for (const auto& k : a) REQUIRE(b.count(k) == 0);
    REQUIRE(train.images.size() + test.images.size() == ds.images.size());
    CHECK(static_cast<double>(train.images.size()) >= frac * ds.images.size());
    CHECK(static_cast<double>(train.images.size()) < frac * ds.images.size() + 6.0);
  }
}

TEST_CASE("patient_split is seed deterministic") {
  detkit::Rng rng(5);
  const auto ds = random_dataset(rng);
  CHECK(dio::patient_split(ds, 0.7, 9) == dio::patient_split(ds, 0.7, 9));
}

TEST_CASE("synth_scenario") {
  dio::SynthSpec spec;
  spec.n_anchors = 500;
  spec.n_gts = 0;
  spec.seed = 3;
  const auto empty = dio::synth_scenario(spec);
  CHECK(empty.gts.empty());
  CHECK(empty.anchors.size() == 500);
  CHECK(empty.regressed.size() == 500);

  spec.n_gts = 20;
  const auto a = dio::synth_scenario(spec);
  CHECK(a == dio::synth_scenario(spec));
  spec.seed = 4;
  CHECK_FALSE(a == dio::synth_scenario(spec));
  for (const auto& g : a.gts) {
    CHECK(g.w >= spec.gt_min);
    CHECK(g.w <= spec.gt_max);
    CHECK(g.x >= 0.0);
    CHECK(g.x + g.w <= spec.image_w);
  }

  dio::SynthSpec bad = spec;
  bad.gt_max = 2000.0;
  CHECK_THROWS_AS(dio::synth_scenario(bad), detkit::DomainError);
  bad = spec;
  bad.gt_min = 50;
  bad.gt_max = 10;
  CHECK_THROWS_AS(dio::synth_scenario(bad), detkit::DomainError);
}

TEST_CASE("regress_toward_nearest without noise lands on the GT at full step") {
  const std::vector<BBox> gts{{10, 10, 20, 20}, {200, 200, 40, 40}};
  const std::vector<BBox> anchors{{0, 0, 30, 30}, {190, 210, 50, 30}, {12, 8, 20, 20}};
  detkit::Rng rng(0);
  const auto full = dio::regress_toward_nearest(anchors, gts, 1.0, 0.0, rng);
  CHECK(full[0] == gts[0]);
  CHECK(full[1] == gts[1]);
  CHECK(full[2] == gts[0]);
  const auto none = dio::regress_toward_nearest(anchors, gts, 0.0, 0.0, rng);
  CHECK(none[1] == anchors[1]);
}

TEST_CASE("scenario dataset and detections") {
  dio::SynthSpec spec;
  spec.n_anchors = 50;
  spec.n_gts = 5;
  spec.seed = 1;
  const auto sc = dio::synth_scenario(spec);
  const auto ds = dio::scenario_dataset(sc, spec);
  CHECK(ds.images.size() == 1);
  CHECK(ds.annotations.size() == 5);
  const auto dets = dio::scenario_detections(sc);
  CHECK(dets.size() == 50);
  for (const auto& d : dets) CHECK((d.score >= 0.0 && d.score <= 1.0));
  const auto back = detkit::scenario_from_json(detkit::scenario_to_json(sc));
  CHECK(back == sc);
}

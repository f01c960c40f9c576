#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "detkit/bda.hpp"
#include "detkit/errors.hpp"
#include "detkit/json_io.hpp"

using detkit::FeatureMap;
namespace bda = detkit::bda;
using hp = boost::multiprecision::cpp_bin_float_50;

namespace {

struct Instance {
  FeatureMap p, c5;
  bda::Params params;
};

Instance random_instance(std::uint64_t seed, std::size_t max_dim = 4) {
  detkit::Rng rng(seed);
  const std::size_t c = 1 + rng.below(max_dim), c5c = 1 + rng.below(max_dim), cp = 1 + rng.below(max_dim);
  const std::size_t h = 1 + rng.below(max_dim), w = 1 + rng.below(max_dim);
  const std::size_t h5 = 1 + rng.below(max_dim), w5 = 1 + rng.below(max_dim);
  Instance in;
  in.params = bda::random_params(c, c5c, cp, rng);
  in.p = bda::random_map(c, h, w, rng);
  in.c5 = bda::random_map(c5c, h5, w5, rng);
  return in;
}

hp sig(const hp& v) { return 1 / (1 + exp(-v)); }

}  // namespace

TEST_CASE("zero parameters give 0.75 * P exactly") {
  detkit::Rng rng(1);
  const auto params = bda::zero_params(3, 5, 2);
  const FeatureMap p = bda::random_map(3, 4, 5, rng);
  const FeatureMap c5 = bda::random_map(5, 2, 3, rng);
  const auto out = bda::forward(p, c5, params);
  for (double v : out.z.data()) CHECK(v == 0.5);
  for (double v : out.s.data()) CHECK(v == 0.5);
  for (double v : out.p_tilde.data()) CHECK(v == 0.0);
  for (double v : out.u) CHECK(v == 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(out.p_bd.data()[i] == 0.75 * p.data()[i]);
}

TEST_CASE("zero input gives zero output for any parameters") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto in = random_instance(seed);
    for (double& v : in.p.data()) v = 0.0;
    const auto out = bda::forward(in.p, in.c5, in.params);
    for (double v : out.p_bd.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("single-pixel chain matches a 50-digit evaluation") {
  const double p = 0.8, c = -1.3;
  const double wz = 0.7, bz = -0.2, wp = 1.1, bp = 0.4, g = 1.3, beta = 0.1, mean = -0.3, var = 0.6,
               eps = 1e-3, ws = 0.9, bs = 0.25;
  bda::Params params;
  params.conv_z = {1, 1, {wz}, {bz}};
  params.conv_proj = {1, 1, {wp}, {bp}};
  params.bn_proj = {{g}, {beta}, {mean}, {var}, eps};
  params.conv_scene = {1, 1, {ws}, {bs}};
  const auto out = bda::forward(FeatureMap(1, 1, 1, std::vector<double>{p}),
                                FeatureMap(1, 1, 1, std::vector<double>{c}), params);

  const hp P(p), C(c);
  const hp z = sig(hp(wz) * P + hp(bz));
  const hp n = hp(g) * (hp(wp) * P + hp(bp) - hp(mean)) / sqrt(hp(var) + hp(eps)) + hp(beta);
  const hp pt = n > 0 ? n : hp(0);
  const hp u = hp(ws) * C + hp(bs);
  const hp s = sig(pt * u);
  const hp expected = (1 + z) * P * s;
  CHECK(std::abs(out.p_bd.data()[0] - expected.convert_to<double>()) < 1e-12);
  CHECK(std::abs(out.z.data()[0] - z.convert_to<double>()) < 1e-12);
  CHECK(std::abs(out.s.data()[0] - s.convert_to<double>()) < 1e-12);
  // Relu active for this choice; check the branch the test intends.
  CHECK(pt > 0);
}

TEST_CASE("gate bounds and sign preservation") {
  for (std::uint64_t seed = 100; seed < 300; ++seed) {
    const auto in = random_instance(seed);
    const auto out = bda::forward(in.p, in.c5, in.params);
    REQUIRE(out.p_bd.same_shape(in.p));
    REQUIRE(out.s.channels() == 1);
    for (double v : out.z.data()) REQUIRE((v > 0.0 && v < 1.0));
    for (double v : out.s.data()) REQUIRE((v > 0.0 && v < 1.0));
    for (std::size_t i = 0; i < in.p.size(); ++i) {
      const double x = in.p.data()[i], y = out.p_bd.data()[i];
      if (x == 0.0) {
        REQUIRE(y == 0.0);
      } else {
        REQUIRE(std::abs(y) < 2.0 * std::abs(x));
      }
      REQUIRE((y == 0.0 || std::signbit(x) == std::signbit(y)));
    }
  }
}

TEST_CASE("forward rejects mismatched shapes") {
  const auto params = bda::zero_params(3, 2, 2);
  CHECK_THROWS_AS(bda::forward(FeatureMap(2, 2, 2), FeatureMap(2, 1, 1), params), detkit::DimensionError);
  CHECK_THROWS_AS(bda::forward(FeatureMap(3, 2, 2), FeatureMap(3, 1, 1), params), detkit::DimensionError);
  auto broken = params;
  broken.conv_scene = {3, 2, std::vector<double>(6, 0.0), std::vector<double>(3, 0.0)};
  CHECK_THROWS_AS(bda::forward(FeatureMap(3, 2, 2), FeatureMap(2, 1, 1), broken), detkit::DimensionError);
  auto not_square = params;
  not_square.conv_z = {2, 3, std::vector<double>(6, 0.0), std::vector<double>(2, 0.0)};
  CHECK_THROWS_AS(bda::forward(FeatureMap(3, 2, 2), FeatureMap(2, 1, 1), not_square), detkit::DimensionError);
}

TEST_CASE("gradient of zero upstream is zero") {
  const auto in = random_instance(7);
  const FeatureMap zero(in.p.channels(), in.p.height(), in.p.width(), 0.0);
  const auto g = bda::grad_input(in.p, in.c5, in.params, zero);
  for (double v : g.p_i.data()) CHECK(v == 0.0);
  for (double v : g.c5.data()) CHECK(v == 0.0);
}

TEST_CASE("zero-weight gradient is 0.75 * upstream exactly") {
  detkit::Rng rng(3);
  const auto params = bda::zero_params(4, 3, 2);
  const FeatureMap p = bda::random_map(4, 3, 3, rng);
  const FeatureMap c5 = bda::random_map(3, 2, 2, rng);
  const FeatureMap up = bda::random_map(4, 3, 3, rng);
  const auto g = bda::grad_input(p, c5, params, up);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(g.p_i.data()[i] == 0.75 * up.data()[i]);
  for (double v : g.c5.data()) CHECK(v == 0.0);
}

TEST_CASE("analytic gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto in = random_instance(1000 + seed);
    const auto report = bda::grad_check(in.p, in.c5, in.params, 1e-6);
    CAPTURE(seed);
    CHECK(report.pass);
    CHECK(report.probes == in.p.size() + in.c5.size());
  }
}

TEST_CASE("grad_check edge tolerances") {
  detkit::Rng rng(9);
  const auto params = bda::zero_params(2, 2, 2);
  const FeatureMap p = bda::random_map(2, 2, 2, rng);
  const FeatureMap c5 = bda::random_map(2, 2, 2, rng);
  CHECK(bda::grad_check(p, c5, params, 1e-5).pass);

  const auto in = random_instance(42);
  const auto r = bda::grad_check(in.p, in.c5, in.params, 0.0);
  CHECK_FALSE(r.pass);
  CHECK(r.max_rel_error > 0.0);
}

TEST_CASE("grad_input rejects a mis-shaped upstream") {
  const auto in = random_instance(5);
  const FeatureMap wrong(in.p.channels() + 1, in.p.height(), in.p.width());
  CHECK_THROWS_AS(bda::grad_input(in.p, in.c5, in.params, wrong), detkit::DimensionError);
}

TEST_CASE("parameter JSON round-trip") {
  const auto in = random_instance(77);
  const auto text = detkit::bda_params_to_json(in.params).dump();
  const auto back = detkit::bda_params_from_json(detkit::Json::parse(text));
  CHECK(back.conv_z.weight == in.params.conv_z.weight);
  CHECK(back.conv_proj.bias == in.params.conv_proj.bias);
  CHECK(back.bn_proj.running_var == in.params.bn_proj.running_var);
  CHECK(back.bn_proj.eps == in.params.bn_proj.eps);
  CHECK(back.conv_scene.weight == in.params.conv_scene.weight);
}

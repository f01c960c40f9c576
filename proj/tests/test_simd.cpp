#include <doctest.h>

#include <cstring>
#include <string>

#include "detkit/geometry.hpp"
#include "detkit/simd.hpp"
#include "support/generators.hpp"

namespace simd = detkit::simd;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_CASE("scalar backend is always available") {
  const auto backends = simd::available();
  REQUIRE(!backends.empty());
  CHECK(backends.front() == simd::Backend::scalar);
  CHECK(simd::supported(simd::best()));
  MESSAGE("best backend: " << std::string(simd::name(simd::best())));
}

TEST_CASE("iou_row backends are bit-identical to scalar") {
  const auto& ref = simd::kernels(simd::Backend::scalar);
  detkit::Rng rng(2024);
  for (simd::Backend b : simd::available()) {
    CAPTURE(std::string(simd::name(b)));
    const auto& k = simd::kernels(b);
    for (int trial = 0; trial < 200; ++trial) {
      // Lengths 0..40 cover every remainder of the vector width.
      auto boxes = testgen::random_boxes(rng, static_cast<std::size_t>(trial % 41));
      const auto lattice = testgen::lattice_boxes(rng, static_cast<std::size_t>(trial % 7));
      boxes.insert(boxes.end(), lattice.begin(), lattice.end());
      const detkit::BoxSet set(boxes);
      const detkit::BBox a = trial % 3 == 0 ? testgen::lattice_boxes(rng, 1)[0] : testgen::random_box(rng);
      const double ax2 = a.x + a.w, ay2 = a.y + a.h;
      const simd::CornerBox corner{a.x, a.y, ax2, ay2, detkit::detail::corner_area(a.x, a.y, ax2, ay2)};
      const simd::BoxColumns cols{set.x1(), set.y1(), set.x2(), set.y2(), set.areas(), set.size()};
      std::vector<double> want(set.size()), got(set.size());
      ref.iou_row(corner, cols, want.data());
      k.iou_row(corner, cols, got.data());
      for (std::size_t j = 0; j < set.size(); ++j) {
        REQUIRE(same_bits(got[j], want[j]));
        REQUIRE(want[j] == detkit::iou(a, boxes[j]));
      }
    }
  }
}

TEST_CASE("axpy backends are bit-identical to scalar") {
  const auto& ref = simd::kernels(simd::Backend::scalar);
  detkit::Rng rng(99);
  for (simd::Backend b : simd::available()) {
    CAPTURE(std::string(simd::name(b)));
    const auto& k = simd::kernels(b);
    for (std::size_t n = 0; n < 67; ++n) {
      std::vector<double> x(n), y(n);
      for (auto& v : x) v = rng.uniform(-3, 3);
      for (auto& v : y) v = rng.uniform(-3, 3);
      const double alpha = rng.uniform(-2, 2);
      auto want = y, got = y;
      ref.axpy(alpha, x.data(), want.data(), n);
      k.axpy(alpha, x.data(), got.data(), n);
      for (std::size_t i = 0; i < n; ++i) REQUIRE(same_bits(got[i], want[i]));
    }
  }
}

TEST_CASE("requesting an unsupported backend throws") {
  for (simd::Backend b : {simd::Backend::avx2, simd::Backend::neon}) {
    if (!simd::supported(b)) CHECK_THROWS_AS(simd::kernels(b), std::invalid_argument);
  }
}

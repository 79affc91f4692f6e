#include <doctest.h>

#include <array>
#include <stdexcept>

#include "cfmesmo/design_space.hpp"

using namespace cfmesmo;

namespace {

ReramDesign design(int cell, double f, double t, int xbar) {
  ReramDesign d;
  d.res_cell = cell;
  d.freq_hz = f;
  d.temperature_k = t;
  d.xbar_size = xbar;
  return d;
}

DesignVector vec(double a, double b, double c, double d) { return DesignVector{{a, b, c, d}}; }

}  // namespace

TEST_CASE("encode maps the corners of the space to the corners of the unit cube") {
  const DesignSpace space;
  CHECK(space.encode(design(1, 1e7, 300, 32)) == vec(0, 0, 0, 0));
  CHECK(space.encode(design(8, 1e9, 400, 128)) == vec(1, 1, 1, 1));
}

TEST_CASE("ordinal coordinates are evenly spaced level indices") {
  const DesignSpace space;
  CHECK(space.encode(design(8, 5e8, 350, 64)).coords[3] == 0.5);
  CHECK(space.encode(design(2, 5e8, 350, 64)).coords[0] == 0.25);
  CHECK(space.encode(design(4, 5e8, 350, 64)).coords[0] == 0.75);
}

TEST_CASE("decode snaps ordinals to the nearest level and clamps") {
  const DesignSpace space;
  const ReramDesign lower = space.decode(vec(0, 0, 0, 0));
  CHECK(lower.res_cell == 1);
  CHECK(lower.freq_hz == 1e7);
  CHECK(lower.temperature_k == 300.0);
  CHECK(lower.xbar_size == 32);
  CHECK(space.decode(vec(0.24, 0.5, 0.5, 0.5)).res_cell == 2);
  CHECK(space.decode(vec(0.5, 0.5, 0.5, 0.6)).xbar_size == 64);
  const ReramDesign wild = space.decode(vec(-3, 7, -1, 2));
  CHECK_NOTHROW(space.validate(wild));
  CHECK(wild.freq_hz == 1e9);
  CHECK(wild.temperature_k == 300.0);
}

TEST_CASE("encode rejects designs outside the space") {
  const DesignSpace space;
  CHECK_THROWS_AS(space.encode(design(5, 5e8, 350, 64)), std::invalid_argument);
  CHECK_THROWS_AS(space.encode(design(8, 5e8, 350, 96)), std::invalid_argument);
  CHECK_THROWS_AS(space.encode(design(8, 2e9, 350, 64)), std::invalid_argument);
  CHECK_THROWS_AS(space.encode(design(8, 5e8, 250, 64)), std::invalid_argument);
}

TEST_CASE("round trip over every ordinal combination and a frequency/temperature grid") {
  const DesignSpace space;
  for (int cell : {1, 2, 3, 4, 8}) {
    for (int xbar : {32, 64, 128}) {
      for (int fi = 0; fi <= 990; fi += 45) {
        for (int ti = 0; ti <= 1000; ti += 77) {
          const ReramDesign d = design(cell, 1e7 + fi * 1e6, 300.0 + ti * 0.1, xbar);
          const ReramDesign back = space.decode(space.encode(d));
          CHECK(back == d);
        }
      }
    }
  }
}

TEST_CASE("decode is total: random cube points always give valid designs") {
  const DesignSpace space;
  Rng rng = make_stream(11);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int i = 0; i < 2000; ++i) {
    const ReramDesign d = space.decode(vec(u(rng), u(rng), u(rng), u(rng)));
    CHECK_NOTHROW(space.validate(d));
  }
}

TEST_CASE("log-frequency encoding is an option") {
  DesignBounds b;
  b.log_frequency = true;
  const DesignSpace space(b, DeviceConstants{});
  CHECK(space.encode(design(8, 1e8, 350, 64)).coords[1] == doctest::Approx(0.5));
  CHECK(space.decode(vec(0, 0.5, 0, 0)).freq_hz == doctest::Approx(1e8));
}

TEST_CASE("sample_designs") {
  const DesignSpace space;
  Rng none = make_stream(7);
  CHECK_THROWS_AS(space.sample(0, none), std::invalid_argument);

  Rng a = make_stream(7), b = make_stream(7);
  CHECK(space.sample(5, a) == space.sample(5, b));

  Rng rng = make_stream(99);
  const auto designs = space.sample(10000, rng);
  std::array<double, 4> mean{};
  for (const auto& d : designs) {
    CHECK_NOTHROW(space.validate(d));
    const DesignVector v = space.encode(d);
    for (std::size_t k = 0; k < 4; ++k) mean[k] += v.coords[k] / designs.size();
  }
  for (double m : mean) CHECK(std::abs(m - 0.5) < 0.02);
}

TEST_CASE("space cardinality") {
  const std::array<std::uint64_t, 4> grid{5, 991, 1000, 3};
  CHECK(space_cardinality(grid) == 14865000ULL);
  // 1 MHz and 0.1 K steps land 0.101% above the published 1.485e7.
  CHECK(static_cast<double>(space_cardinality(grid)) == doctest::Approx(1.485e7).epsilon(2e-3));
  const std::array<std::uint64_t, 4> ones{1, 1, 1, 1};
  CHECK(space_cardinality(ones) == 1);
  const std::array<std::uint64_t, 4> twos{2, 2, 2, 2};
  CHECK(space_cardinality(twos) == 16);
}

TEST_CASE("fidelity discretization maps 1 to the top level") {
  CHECK(fidelity_level(1.0, 10) == 9);
  CHECK(fidelity_level(0.0, 10) == 0);
  CHECK(snap_fidelity(0.5, 10) == doctest::Approx(5.0 / 9.0));
  CHECK(FidelityVector::highest(4).is_highest());
  CHECK_FALSE((FidelityVector{{1.0, 0.5}}).is_highest());
}

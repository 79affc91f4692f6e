#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmesmo/crossbar.hpp"
#include "oracles.hpp"

using namespace cfmesmo;

namespace {

ReramDesign design_with(int res_cell, int xbar, int res_adc = 8) {
  ReramDesign d;
  d.res_cell = res_cell;
  d.xbar_size = xbar;
  d.device.res_adc = res_adc;
  return d;
}

QuantizedMatrix codes_of(const CodeMatrix& c, int bits = 8) {
  QuantizedMatrix q;
  q.codes = c;
  q.bits = bits;
  q.scale = 1.0;
  return q;
}

CodeMatrix random_codes(Eigen::Index rows, Eigen::Index cols, int lo, int hi, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(lo, hi);
  CodeMatrix c(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) c(i, j) = u(rng);
  return c;
}

Eigen::MatrixXd integer_product(const CodeMatrix& input, const CodeMatrix& weights) {
  return input.cast<double>() * weights.cast<double>();
}

MappedLayer noiseless_layer(const CodeMatrix& w, const ReramDesign& d, std::size_t dup = 1) {
  MappedLayer layer = MappedLayer::map(codes_of(w), d, dup);
  Rng rng = make_stream(0);
  layer.program(rng, NoiseSources::none());
  return layer;
}

double variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("quantize: symmetric endpoints, zero, and half-step error") {
  Eigen::MatrixXd v(1, 3);
  v << -1.0, 0.0, 1.0;
  const QuantizedMatrix q = quantize(v, 8);
  CHECK(q.codes(0, 0) == -127);
  CHECK(q.codes(0, 1) == 0);
  CHECK(q.codes(0, 2) == 127);

  for (int bits = 1; bits <= 8; ++bits) {
    const QuantizedMatrix z = quantize(Eigen::MatrixXd::Zero(1, 1), bits);
    CHECK(z.codes(0, 0) == 0);
    CHECK(z.scale == 1.0);
  }

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  Eigen::MatrixXd r(16, 16);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = n(rng);
  const QuantizedMatrix qr = quantize(r, 8);
  CHECK(qr.scale > 0.0);
  const Eigen::MatrixXd back = qr.dequantize();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    CHECK(std::abs(back(i) - r(i)) <= qr.scale / 2 + 1e-15);
    CHECK(std::abs(qr.codes(i)) <= 127);
  }
  CHECK(qr.codes.cwiseAbs().maxCoeff() == 127);
  CHECK_THROWS_AS(quantize(r, 0), std::invalid_argument);
}

TEST_CASE("quantize_rows gives each row its own scale") {
  Eigen::MatrixXd v(2, 2);
  v << 1.0, -0.5, 10.0, 5.0;
  Eigen::VectorXd scales;
  const QuantizedMatrix q = quantize_rows(v, 8, scales);
  REQUIRE(scales.size() == 2);
  CHECK(scales[0] == doctest::Approx(1.0 / 127));
  CHECK(scales[1] == doctest::Approx(10.0 / 127));
  CHECK(q.codes(0, 0) == 127);
  CHECK(q.codes(1, 0) == 127);
  CHECK(q.codes(1, 1) == 64);
}

TEST_CASE("slices per weight and big-endian digits") {
  CHECK(slices_per_weight(8, 2) == 4);
  CHECK(slices_per_weight(8, 8) == 1);
  CHECK(slices_per_weight(8, 3) == 3);
  CHECK(slices_per_weight(8, 1) == 8);
  // 0b10'01'11'00 = 156 -> digits 2,1,3,0 most significant first
  CHECK(slice_digit(156, 0, 4, 2) == 2);
  CHECK(slice_digit(156, 1, 4, 2) == 1);
  CHECK(slice_digit(156, 2, 4, 2) == 3);
  CHECK(slice_digit(156, 3, 4, 2) == 0);
}

TEST_CASE("mapping: levels on the grid, zero code at G_min on both sides, tiling") {
  const ReramDesign d = design_with(2, 4);
  CodeMatrix w(6, 5);
  w.setZero();
  w(0, 0) = 127;
  w(1, 1) = -93;
  const MappedLayer layer = MappedLayer::map(codes_of(w), d, 2);
  CHECK(layer.slices() == 4);
  // 2 row tiles x 2 col tiles x 4 slices x 2 sides x 2 copies
  CHECK(layer.crossbar_count() == 2u * 2u * 4u * 2u * 2u);
  const double gmin = d.device.g_min(), gmax = d.device.g_max();
  const double step = (gmax - gmin) / 3.0;
  CHECK(layer.level_step() == doctest::Approx(step));
  for (const auto& t : layer.tiles()) {
    CHECK(t.g.target.rows() <= 4);
    CHECK(t.g.target.cols() <= 4);
    for (Eigen::Index i = 0; i < t.g.target.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.g.target.cols(); ++j) {
        const double g = t.g.target(i, j);
        CHECK(g >= gmin);
        CHECK(g <= gmax * (1 + 1e-12));
        const double lvl = (g - gmin) / step;
        CHECK(std::abs(lvl - std::round(lvl)) < 1e-9);
        const Eigen::Index r = t.row_offset + i, c = t.col_offset + j;
        const int code = w(r, c);
        const bool here = t.negative ? code < 0 : code > 0;
        const int digit = here ? slice_digit(std::abs(code), t.slice, 4, 2) : 0;
        CHECK(std::lround(lvl) == digit);
      }
    }
  }
  CHECK_THROWS_AS(MappedLayer::map(codes_of(CodeMatrix(0, 3)), d), std::invalid_argument);
  CHECK_THROWS_AS(MappedLayer::map(codes_of(w), d, 0), std::invalid_argument);
}

TEST_CASE("programming: zero sigma is exact, unprogrammed layer refuses reads") {
  std::mt19937_64 gen(3);
  const CodeMatrix w = random_codes(8, 8, -127, 127, gen);
  ReramDesign d = design_with(2, 8);
  MappedLayer layer = MappedLayer::map(codes_of(w), d);
  Rng rng = make_stream(1);
  const QuantizedMatrix x = codes_of(random_codes(1, 8, -127, 127, gen));
  CHECK_THROWS_AS(layer.mvm(x, rng, ReadSettings::noiseless()), std::logic_error);

  d.device.sigma_prog = 0.0;
  MappedLayer zero = MappedLayer::map(codes_of(w), d);
  zero.program(rng, NoiseSources::all());
  CHECK(zero.programmed());
  for (const auto& t : zero.tiles()) CHECK(t.g.noisy == t.g.target);
}

TEST_CASE("programming noise: per-cell std and copy independence") {
  CodeMatrix w(2, 2);
  w << 64, 0, 0, 0;  // res_cell 2: digits 1,0,0,0 -> cell at level 1 in slice 0
  const ReramDesign d = design_with(2, 8);
  MappedLayer layer = MappedLayer::map(codes_of(w), d, 2);
  const std::size_t n = 100000;
  std::vector<double> a(n), b(n);
  Rng rng = make_stream(42);
  // tile layout: copy-major, then slice, then side
  const auto find = [&](std::size_t copy) -> std::size_t {
    for (std::size_t i = 0; i < layer.tiles().size(); ++i) {
      const auto& t = layer.tiles()[i];
      if (t.copy == copy && t.slice == 0 && !t.negative) return i;
    }
    FAIL("tile missing");
    return 0;
  };
  const std::size_t ta = find(0), tb = find(1);
  const double target = layer.tiles()[ta].g.target(0, 0);
  CHECK(target == doctest::Approx(d.device.g_min() + layer.level_step()));
  for (std::size_t k = 0; k < n; ++k) {
    layer.program(rng, NoiseSources::all());
    a[k] = layer.tiles()[ta].g.noisy(0, 0) - target;
    b[k] = layer.tiles()[tb].g.noisy(0, 0) - target;
  }
  CHECK(std::sqrt(variance(a)) == doctest::Approx(d.device.sigma_prog * target).epsilon(0.02));
  double cov = 0.0;
  for (std::size_t k = 0; k < n; ++k) cov += a[k] * b[k];
  const double corr = cov / static_cast<double>(n - 1) / std::sqrt(variance(a) * variance(b));
  CHECK(std::abs(corr) < 0.01);
}

TEST_CASE("ideal path equals integer matrix multiplication") {
  std::mt19937_64 gen(5);
  {
    CodeMatrix eye = CodeMatrix::Identity(2, 2);
    CodeMatrix x(1, 2);
    x << 1, 0;
    const MappedLayer layer = noiseless_layer(eye, design_with(2, 128, 0));
    Rng rng = make_stream(0);
    const Eigen::MatrixXd y = layer.mvm(codes_of(x), rng, ReadSettings::noiseless());
    CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(y(0, 1)) < 1e-9);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int rc = std::vector<int>{1, 2, 3, 4, 8}[static_cast<std::size_t>(trial % 5)];
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(gen() % 150), cols = 1 + static_cast<Eigen::Index>(gen() % 20);
    const CodeMatrix w = random_codes(rows, cols, -127, 127, gen);
    const CodeMatrix x = random_codes(3, rows, -127, 127, gen);
    const MappedLayer layer = noiseless_layer(w, design_with(rc, 64, 0));
    Rng rng = make_stream(0);
    const Eigen::MatrixXd y = layer.mvm(codes_of(x), rng, ReadSettings::noiseless());
    const Eigen::MatrixXd exact = integer_product(x, w);
    CHECK((y - exact).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("finite ADC path matches the fixed-point oracle bit-exactly") {
  std::mt19937_64 gen(2024);
  for (int rc : {1, 2, 4, 8}) {
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const CodeMatrix w = random_codes(8, 8, -127, 127, gen);
      const CodeMatrix x = random_codes(1, 8, -127, 127, gen);
      const ReramDesign d = design_with(rc, 128, 8);
      const MappedLayer layer = noiseless_layer(w, d);
      Rng rng = make_stream(0);
      const Eigen::MatrixXd y = layer.mvm(codes_of(x), rng, ReadSettings::noiseless());

      oracle::CrossbarSetup s;
      s.res_cell = rc;
      std::vector<std::vector<int>> ww(8, std::vector<int>(8));
      std::vector<int> xx(8);
      for (int i = 0; i < 8; ++i) {
        xx[i] = x(0, i);
        for (int j = 0; j < 8; ++j) ww[i][j] = w(i, j);
      }
      const auto ref = oracle::crossbar_mvm(s, ww, xx, 8);
      for (int j = 0; j < 8; ++j) mismatches += y(0, j) != ref[static_cast<std::size_t>(j)];
    }
    CHECK_MESSAGE(mismatches == 0, "res_cell=" << rc);
  }
}

TEST_CASE("coarse DAC path matches the fixed-point oracle") {
  std::mt19937_64 gen(8);
  ReramDesign d = design_with(4, 16, 6);
  d.device.res_dac = 4;
  oracle::CrossbarSetup s;
  s.res_cell = 4;
  s.res_dac = 4;
  s.res_adc = 6;
  s.xbar = 16;
  for (int trial = 0; trial < 20; ++trial) {
    const CodeMatrix w = random_codes(20, 6, -127, 127, gen);
    const CodeMatrix x = random_codes(1, 20, -127, 127, gen);
    const MappedLayer layer = noiseless_layer(w, d);
    Rng rng = make_stream(0);
    const Eigen::MatrixXd y = layer.mvm(codes_of(x), rng, ReadSettings::noiseless());
    std::vector<std::vector<int>> ww(20, std::vector<int>(6));
    std::vector<int> xx(20);
    for (int i = 0; i < 20; ++i) {
      xx[i] = x(0, i);
      for (int j = 0; j < 6; ++j) ww[i][j] = w(i, j);
    }
    const auto ref = oracle::crossbar_mvm(s, ww, xx, 8);
    for (int j = 0; j < 6; ++j) CHECK(y(0, j) == doctest::Approx(ref[static_cast<std::size_t>(j)]).epsilon(1e-12));
  }
}

TEST_CASE("negating the weights negates the noiseless output") {
  std::mt19937_64 gen(17);
  for (int rc : {1, 2, 4, 8}) {
    const CodeMatrix w = random_codes(40, 7, -127, 127, gen);
    const CodeMatrix x = random_codes(4, 40, -127, 127, gen);
    Rng rng = make_stream(0);
    const Eigen::MatrixXd y = noiseless_layer(w, design_with(rc, 32)).mvm(codes_of(x), rng, ReadSettings::noiseless());
    const CodeMatrix neg = -w;
    const Eigen::MatrixXd yn =
        noiseless_layer(neg, design_with(rc, 32)).mvm(codes_of(x), rng, ReadSettings::noiseless());
    CHECK((y + yn).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("tiling invariance: 100x100 on 64 and 128 tiles") {
  std::mt19937_64 gen(23);
  const CodeMatrix w = random_codes(100, 100, -127, 127, gen);
  const CodeMatrix x = random_codes(5, 100, -127, 127, gen);
  Rng rng = make_stream(0);
  const Eigen::MatrixXd a = noiseless_layer(w, design_with(2, 64, 0)).mvm(codes_of(x), rng, ReadSettings::noiseless());
  const Eigen::MatrixXd b = noiseless_layer(w, design_with(2, 128, 0)).mvm(codes_of(x), rng, ReadSettings::noiseless());
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((a.array().round() == b.array().round()).all());
}

TEST_CASE("duplication: averaging k copies shrinks the error variance") {
  std::mt19937_64 gen(31);
  const CodeMatrix w = random_codes(16, 4, -127, 127, gen);
  const CodeMatrix x = random_codes(1, 16, 0, 127, gen);
  const Eigen::MatrixXd exact = integer_product(x, w);
  const ReramDesign d = design_with(2, 16, 0);
  const ReadSettings read = ReadSettings::at_design(d, NoiseSources::all());
  const int n = 10000;
  auto error_variance = [&](std::size_t k) {
    MappedLayer layer = MappedLayer::map(codes_of(w), d, k);
    Rng rng = make_stream(99, {k});
    std::vector<double> err(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      layer.program(rng, NoiseSources::all());
      err[static_cast<std::size_t>(t)] = layer.mvm_mean_over_copies(codes_of(x), rng, read)(0, 0) - exact(0, 0);
    }
    return variance(err);
  };
  const double v1 = error_variance(1), v2 = error_variance(2), v4 = error_variance(4);
  CHECK(v2 < v1);
  CHECK(v4 < v2);
  CHECK(v4 == doctest::Approx(v1 / 4).epsilon(0.2));
}

TEST_CASE("round-robin serving uses copy b mod k") {
  std::mt19937_64 gen(41);
  const CodeMatrix w = random_codes(8, 3, -127, 127, gen);
  const CodeMatrix x = random_codes(6, 8, -127, 127, gen);
  const ReramDesign d = design_with(4, 8, 0);
  MappedLayer layer = MappedLayer::map(codes_of(w), d, 3);
  Rng prog = make_stream(2);
  layer.program(prog, NoiseSources::all());
  Rng rng = make_stream(0);
  const Eigen::MatrixXd all = layer.mvm(codes_of(x), rng, ReadSettings::noiseless());
  for (Eigen::Index b = 0; b < 6; ++b) {
    const Eigen::MatrixXd one =
        layer.mvm_on_copy(codes_of(x.row(b)), static_cast<std::size_t>(b % 3), rng, ReadSettings::noiseless());
    CHECK((one.row(0) - all.row(b)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("JSON dump and load reproduce the layer") {
  std::mt19937_64 gen(7);
  const CodeMatrix w = random_codes(20, 9, -127, 127, gen);
  const CodeMatrix x = random_codes(3, 20, -127, 127, gen);
  MappedLayer layer = MappedLayer::map(codes_of(w), design_with(2, 16), 2);
  Rng prog = make_stream(5);
  layer.program(prog, NoiseSources::all());
  const nlohmann::json j = layer.to_json();
  const MappedLayer back = MappedLayer::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.design() == layer.design());
  CHECK(back.duplication() == 2);
  CHECK(back.programmed());
  Rng r1 = make_stream(0), r2 = make_stream(0);
  const Eigen::MatrixXd a = layer.mvm(codes_of(x), r1, ReadSettings::noiseless());
  const Eigen::MatrixXd b = back.mvm(codes_of(x), r2, ReadSettings::noiseless());
  CHECK(a == b);
}

TEST_CASE("read noise is fresh on every call and reproducible per stream") {
  std::mt19937_64 gen(9);
  const CodeMatrix w = random_codes(32, 4, -127, 127, gen);
  const CodeMatrix x = random_codes(1, 32, -127, 127, gen);
  const ReramDesign d = design_with(8, 32, 0);
  const MappedLayer layer = noiseless_layer(w, d);
  ReadSettings read = ReadSettings::at_design(d, NoiseSources::all());
  Rng rng = make_stream(4);
  const Eigen::MatrixXd a = layer.mvm(codes_of(x), rng, read);
  const Eigen::MatrixXd b = layer.mvm(codes_of(x), rng, read);
  CHECK(a != b);
  Rng again = make_stream(4);
  CHECK(layer.mvm(codes_of(x), again, read) == a);
}

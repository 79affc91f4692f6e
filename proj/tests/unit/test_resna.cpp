#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "cfmesmo/resna.hpp"
#include "oracles.hpp"

using namespace cfmesmo;

namespace {

const Dataset& default_blobs() {
  static const Dataset d = make_blobs(BlobSpec{}, 2024);
  return d;
}

ReramDesign ideal_design() {
  ReramDesign d;
  d.device.res_adc = 0;
  return d;
}

MlpSpec quiet_spec() {
  MlpSpec s;
  s.sources = NoiseSources::none();
  return s;
}

}  // namespace

TEST_CASE("blobs are deterministic and stratified") {
  const BlobSpec spec;
  const Dataset a = make_blobs(spec, 7), b = make_blobs(spec, 7), c = make_blobs(spec, 8);
  CHECK(a.train_x == b.train_x);
  CHECK(a.test_x == b.test_x);
  CHECK(a.train_y == b.train_y);
  CHECK(a.train_x != c.train_x);
  CHECK(a.train_x.rows() == 2000);
  CHECK(a.test_x.rows() == 1000);
  CHECK(a.dim() == 64u);
  for (const auto* labels : {&a.train_y, &a.test_y}) {
    std::vector<int> counts(10, 0);
    for (int y : *labels) {
      REQUIRE(y >= 0);
      REQUIRE(y < 10);
      ++counts[static_cast<std::size_t>(y)];
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
  }
  const Dataset odd = make_blobs(BlobSpec{3, 4, 10, 7}, 1);
  std::vector<int> counts(3, 0);
  for (int y : odd.train_y) ++counts[static_cast<std::size_t>(y)];
  CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
}

TEST_CASE("default blobs are linearly separable to 90%") {
  const Dataset& d = default_blobs();
  CHECK(oracle::least_squares_accuracy(d.train_x, d.train_y, d.test_x, d.test_y, d.classes) >= 0.90);
}

TEST_CASE("CSV reader") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::istringstream good("# header comment\n1,0.5,2\n\n0,-1,3e-1\n");
  read_labeled_csv(good, "good.csv", x, y);
  CHECK(x.rows() == 2);
  CHECK(x.cols() == 2);
  CHECK(y == std::vector<int>{1, 0});
  CHECK(x(1, 1) == doctest::Approx(0.3));

  auto error_of = [](const std::string& text) {
    Eigen::MatrixXd xx;
    std::vector<int> yy;
    std::istringstream in(text);
    try {
      read_labeled_csv(in, "bad.csv", xx, yy);
    } catch (const std::runtime_error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string ragged = error_of("1,0.5,2\n0,1\n");
  CHECK(ragged.find("bad.csv") != std::string::npos);
  CHECK(ragged.find("bad.csv:2:") != std::string::npos);
  const std::string junk = error_of("1,0.5\n2,abc\n");
  CHECK(junk.find("bad.csv:2:") != std::string::npos);
  CHECK_FALSE(error_of("-1,0.5\n").empty());
  CHECK_FALSE(error_of("x,0.5\n").empty());
}

TEST_CASE("majority vote with logit tie-break") {
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(10);
  CHECK(majority_vote({2, 2, 7}, logits) == 2);
  CHECK(majority_vote({7, 2, 7}, logits) == 7);
  logits[4] = 1.0;
  logits[6] = 3.0;
  CHECK(majority_vote({4, 6, 1}, logits) == 6);
  CHECK(majority_vote({5}, logits) == 5);
}

TEST_CASE("epochs for fidelity") {
  CHECK(epochs_for_fidelity(1.0) == 100u);
  CHECK(epochs_for_fidelity(0.0) == 10u);
  CHECK(epochs_for_fidelity(0.5) == 55u);
  for (int k = 0; k <= 9; ++k) CHECK(epochs_for_fidelity(k / 9.0) == static_cast<std::size_t>(10 + 10 * k));
  CHECK_THROWS(epochs_for_fidelity(1.5));
  CHECK_THROWS(epochs_for_fidelity(-0.1));
}

TEST_CASE("spec validation") {
  MlpSpec s;
  CHECK_NOTHROW(s.validate());
  s.voting_copies = 2;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.voting_copies = 3;
  s.widths = {64};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("training rejects zero epochs and reduces the loss") {
  const Dataset& d = default_blobs();
  CHECK_THROWS_AS(train(quiet_spec(), ideal_design(), d, 0, 1), std::invalid_argument);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TrainState st = train(quiet_spec(), ideal_design(), d, 1, seed);
    REQUIRE(st.epoch_loss.size() == 1);
    CHECK(st.epochs == 1u);
    CHECK(float_loss(st, d) < st.initial_loss);
  }
}

TEST_CASE("noise disabled: 30 epochs reach 90% and inference is deterministic") {
  const Dataset& d = default_blobs();
  const ReramDesign design = ideal_design();
  const TrainState st = train(quiet_spec(), design, d, 30, 11);
  const InferenceResult r = infer(st, quiet_spec(), design, d, 4, true, 3);
  CHECK(r.accuracy >= 0.90);
  REQUIRE(r.per_run.size() == 4);
  for (double a : r.per_run) CHECK(a == r.per_run.front());
  for (std::size_t i = 1; i < st.epoch_loss.size(); ++i) CHECK(std::isfinite(st.epoch_loss[i]));

  // master weights stay noise-free: training with noise and re-inferring without is deterministic
  MlpSpec noisy;
  const TrainState ns = train(noisy, design, d, 2, 5);
  const InferenceResult q = infer(ns, noisy, design, d, 3, false, 1, NoiseSources::none());
  CHECK(q.per_run[0] == q.per_run[1]);
  CHECK(q.per_run[1] == q.per_run[2]);
}

TEST_CASE("training is reproducible per seed") {
  const Dataset& d = default_blobs();
  const MlpSpec spec;
  ReramDesign design;
  const TrainState a = train(spec, design, d, 1, 9), b = train(spec, design, d, 1, 9);
  for (std::size_t l = 0; l < a.weights.size(); ++l) CHECK(a.weights[l] == b.weights[l]);
  CHECK(infer(a, spec, design, d, 2, true, 4).per_run == infer(b, spec, design, d, 2, true, 4).per_run);
}

TEST_CASE("accuracy objective reports epochs and cost") {
  AccuracyObjectiveConfig cfg;
  cfg.inference_runs = 2;
  const AccuracyEvaluation e = accuracy_objective(ReramDesign{}, 0.0, cfg, default_blobs(), 1);
  CHECK(e.epochs == 10u);
  CHECK(e.per_run.size() == 2u);
  CHECK(e.accuracy >= 0.0);
  CHECK(e.accuracy <= 1.0);
  CHECK(e.cost_seconds > 0.0);
}

namespace {

ReramDesign high_noise_corner() {
  ReramDesign d;
  d.res_cell = 8;
  d.freq_hz = 1e9;
  d.temperature_k = 400.0;
  return d;
}

double median5(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("accuracy at the highest fidelity is at least the lowest-fidelity accuracy") {
  AccuracyObjectiveConfig cfg;
  cfg.inference_runs = 3;
  double lo = 0.0, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    lo += accuracy_objective(ReramDesign{}, 0.0, cfg, default_blobs(), seed).accuracy;
    hi += accuracy_objective(ReramDesign{}, 1.0, cfg, default_blobs(), seed).accuracy;
  }
  CHECK(hi >= lo);
}

TEST_CASE("reduced classifier noise does not lower median noisy accuracy") {
  const ReramDesign d = high_noise_corner();
  std::vector<double> reduced, full;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MlpSpec on, off;
    off.reduce_classifier_noise = false;
    reduced.push_back(infer(train(on, d, default_blobs(), 30, seed), on, d, default_blobs(), 5, true, seed).accuracy);
    full.push_back(infer(train(off, d, default_blobs(), 30, seed), off, d, default_blobs(), 5, true, seed).accuracy);
  }
  CHECK(median5(reduced) >= median5(full));
}

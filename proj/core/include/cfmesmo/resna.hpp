#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfmesmo/crossbar.hpp"
#include "cfmesmo/design_space.hpp"
#include "cfmesmo/noise.hpp"

namespace cfmesmo {

/// Classification data with disjoint train/test splits. Rows are samples.
struct Dataset {
  Eigen::MatrixXd train_x;
  std::vector<int> train_y;
  Eigen::MatrixXd test_x;
  std::vector<int> test_y;
  int classes = 0;

  std::size_t dim() const { return static_cast<std::size_t>(train_x.cols()); }
};

/// Isotropic Gaussian classes around random means.
struct BlobSpec {
  int classes = 10;
  std::size_t dim = 64;
  std::size_t train = 2000;
  std::size_t test = 1000;
  double separation = 0.5;  // std of the class-mean coordinates
  double noise_std = 1.0;   // within-class std
  double offset = 3.0;      // common shift added to every feature

  bool operator==(const BlobSpec&) const = default;
};

/// Stratified: class counts differ by at most one in each split.
Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed);

/// Reads "label,f1,...,fd" lines (blank lines and '#' comments skipped).
/// Throws std::runtime_error naming the source and line on malformed input.
void read_labeled_csv(std::istream& in, const std::string& source, Eigen::MatrixXd& x, std::vector<int>& y);
Dataset load_csv_dataset(const std::string& train_path, const std::string& test_path);

struct MlpSpec {
  std::vector<std::size_t> widths{64, 32, 10};
  std::size_t voting_copies = 3;
  bool reduce_classifier_noise = true;
  double classifier_freq_hz = 1e8;
  double classifier_temperature_k = 300.0;
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double momentum = 0.9;
  int activation_bits = 0;          // 0 uses the device bit_quan
  bool resample_noise_per_batch = true;  // false: once per epoch
  NoiseSources sources{};
  RtnParams rtn{};

  /// Throws std::invalid_argument on an invalid spec.
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

/// Noise-free master parameters plus optimizer state.
struct TrainState {
  std::vector<Eigen::MatrixXd> weights;  // (inputs x outputs) per layer
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::MatrixXd> velocity_w;
  std::vector<Eigen::VectorXd> velocity_b;
  std::size_t epochs = 0;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean training loss of each epoch
};

struct TrainOptions {
  /// False trains the same network with every noise source disabled.
  bool noise_aware = true;
  /// Forward passes through the crossbar model; false uses exact float arithmetic.
  bool through_crossbar = true;
};

/// Throws std::invalid_argument for epochs == 0 and std::runtime_error
/// (naming the epoch) if the loss becomes non-finite.
TrainState train(const MlpSpec& spec, const ReramDesign& design, const Dataset& data, std::size_t epochs,
                 std::uint64_t seed, const TrainOptions& options = {});

/// Majority class; ties go to the tied class with the largest summed logit.
int majority_vote(const std::vector<int>& predictions, const Eigen::Ref<const Eigen::VectorXd>& summed_logits);

struct InferenceResult {
  double accuracy = 0.0;  // mean over runs
  std::vector<double> per_run;
};

/// Mean test accuracy over `runs` independent deployments (program + read).
InferenceResult infer(const TrainState& state, const MlpSpec& spec, const ReramDesign& design, const Dataset& data,
                      std::size_t runs, bool voting, std::uint64_t seed);
/// Same with an explicit set of active noise sources.
InferenceResult infer(const TrainState& state, const MlpSpec& spec, const ReramDesign& design, const Dataset& data,
                      std::size_t runs, bool voting, std::uint64_t seed, const NoiseSources& sources);

/// Mean cross-entropy of the exact (float) network on the training split.
double float_loss(const TrainState& state, const Dataset& data);

/// Training epochs used at fidelity z: round(10 + 90 z).
std::size_t epochs_for_fidelity(double z);

struct AccuracyEvaluation {
  double accuracy = 0.0;
  std::size_t epochs = 0;
  double cost_seconds = 0.0;  // CPU time of this evaluation
  std::vector<double> per_run;
};

struct AccuracyObjectiveConfig {
  MlpSpec mlp{};
  BlobSpec data{};
  std::uint64_t data_seed = 2024;
  std::string train_csv;  // both set: load the dataset from CSV instead of generating blobs
  std::string test_csv;
  std::size_t inference_runs = 10;
  bool voting = true;

  bool operator==(const AccuracyObjectiveConfig&) const = default;
};

AccuracyEvaluation accuracy_objective(const ReramDesign& design, double z, const AccuracyObjectiveConfig& config,
                                      const Dataset& data, std::uint64_t seed);

}  // namespace cfmesmo

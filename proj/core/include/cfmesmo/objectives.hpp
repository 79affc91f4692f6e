#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfmesmo/design_space.hpp"
#include "cfmesmo/resna.hpp"

namespace cfmesmo {

/// One crossbar-mapped layer of the deployed network.
struct LayerSpec {
  std::size_t rows = 0;                   // inputs
  std::size_t cols = 0;                   // outputs
  std::size_t vectors_per_inference = 1;  // input vectors (unrolled conv positions)
  std::size_t duplication = 1;            // copies serving vectors in parallel
  std::size_t voting_copies = 1;          // copies that all see every vector

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  /// Fully connected network matching an MLP spec (classifier carries the voting copies).
  static NetworkSpec from_mlp(const MlpSpec& mlp, bool voting);
  bool operator==(const NetworkSpec&) const = default;
};

/// Invented parametric hardware model.
struct HwCostParams {
  double cell_area_um2 = 0.0041;
  double adc_area_um2 = 300.0;      // at 8 bits; doubles per extra bit
  double dac_area_um2 = 0.8;        // per bit per row driver
  std::size_t cols_per_adc = 8;
  double read_cycles = 1.0;         // cycles per analog read, before ADC muxing
  double adc_energy_j = 2e-12;      // per conversion at 8 bits; doubles per extra bit
  double dac_energy_j = 5e-15;      // per bit per row drive

  bool operator==(const HwCostParams&) const = default;
};

struct HwBreakdown {
  std::size_t crossbars = 0;
  double area_mm2 = 0.0;
  double cycles = 0.0;
  double latency_s = 0.0;
  double crossbar_energy_j = 0.0;
  double converter_energy_j = 0.0;
  double energy_j() const { return crossbar_energy_j + converter_energy_j; }
};

HwBreakdown hw_breakdown(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params);
std::size_t crossbar_count(const ReramDesign& design, const NetworkSpec& net);
/// Negated (maximization) area in mm^2, latency in s and energy in J.
double hw_area(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params);
double hw_latency(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params);
double hw_energy(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params);

/// Outcome of one objective evaluation.
struct Evaluation {
  Eigen::VectorXd y;           // maximization orientation
  double cost_seconds = 0.0;   // measured CPU time, 0 for analytic problems
  std::vector<double> detail;  // problem-specific extras (e.g. per-run accuracies)
};

/// Multi-objective problem over x in [0,1]^d with per-objective fidelities.
/// All objectives are maximized; fidelity 1 is exact.
class MooProblem {
 public:
  virtual ~MooProblem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_objectives() const = 0;
  /// Objectives whose value depends on fidelity; the others are always evaluated at 1.
  virtual std::vector<bool> fidelity_bearing() const = 0;
  /// Throws on failure. Deterministic given seed.
  virtual Evaluation evaluate(const Eigen::VectorXd& x, const FidelityVector& z, std::uint64_t seed) const = 0;
  /// Per-objective evaluation cost C_j(x, z_j) > 0, nondecreasing in z_j.
  virtual double objective_cost(std::size_t j, const Eigen::VectorXd& x, double z) const = 0;
  /// Point every reported front member is expected to dominate.
  virtual Eigen::VectorXd reference_point() const = 0;
  /// Maps x to the point actually evaluated (e.g. snapped ordinals).
  virtual Eigen::VectorXd canonicalize(const Eigen::VectorXd& x) const { return x; }
  /// Column names and values describing x in domain units.
  virtual std::vector<std::string> input_names() const;
  virtual std::vector<double> describe(const Eigen::VectorXd& x) const;
  virtual std::vector<std::string> objective_names() const;

  /// sum_j C_j(x, z_j) / C_j(x, 1); equals num_objectives() at the highest fidelity.
  double normalized_cost(const Eigen::VectorXd& x, const FidelityVector& z) const;
  /// Fidelity vector with `z` on fidelity-bearing objectives and 1 elsewhere.
  FidelityVector fidelity(double z) const;
};

struct ReramProblemConfig {
  DesignBounds bounds{};
  DeviceConstants device{};
  AccuracyObjectiveConfig accuracy{};
  HwCostParams hw{};
  double reference_margin = 0.1;  // relative slack beyond the worst corner

  bool operator==(const ReramProblemConfig&) const = default;
};

/// f1 accuracy (fidelity = training epochs), f2..f4 negated area, latency, energy.
class ReramProblem final : public MooProblem {
 public:
  explicit ReramProblem(ReramProblemConfig config);

  std::string name() const override { return "reram"; }
  std::size_t input_dim() const override { return kDesignDims; }
  std::size_t num_objectives() const override { return 4; }
  std::vector<bool> fidelity_bearing() const override { return {true, false, false, false}; }
  Evaluation evaluate(const Eigen::VectorXd& x, const FidelityVector& z, std::uint64_t seed) const override;
  /// Training time is proportional to epochs; analytic objectives cost 1.
  double objective_cost(std::size_t j, const Eigen::VectorXd& x, double z) const override;
  Eigen::VectorXd reference_point() const override { return reference_; }
  Eigen::VectorXd canonicalize(const Eigen::VectorXd& x) const override;
  std::vector<std::string> input_names() const override;
  std::vector<double> describe(const Eigen::VectorXd& x) const override;
  std::vector<std::string> objective_names() const override;

  ReramDesign design_of(const Eigen::VectorXd& x) const;
  const DesignSpace& space() const { return space_; }
  const Dataset& dataset() const { return data_; }
  const ReramProblemConfig& config() const { return config_; }

 private:
  ReramProblemConfig config_;
  DesignSpace space_;
  Dataset data_;
  NetworkSpec net_;
  Eigen::VectorXd reference_;
};

struct SyntheticCostModel {
  double c0 = 0.1;
  double c1 = 0.9;
  bool operator==(const SyntheticCostModel&) const = default;
};

/// Two-objective analytic benchmark with g_j(x, z) = f_j(x) - (1 - z) b_j(x), b_j >= 0.
class SyntheticProblem : public MooProblem {
 public:
  std::size_t num_objectives() const override { return 2; }
  std::vector<bool> fidelity_bearing() const override { return {true, true}; }
  Evaluation evaluate(const Eigen::VectorXd& x, const FidelityVector& z, std::uint64_t seed) const override;
  double objective_cost(std::size_t j, const Eigen::VectorXd& x, double z) const override;

  /// Exact objective values (maximization).
  virtual Eigen::Vector2d exact(const Eigen::VectorXd& x) const = 0;
  /// Nonnegative low-fidelity bias per objective.
  virtual Eigen::Vector2d bias(const Eigen::VectorXd& x) const = 0;
  Eigen::Vector2d at_fidelity(const Eigen::VectorXd& x, double z1, double z2) const;

  SyntheticCostModel cost_model{};
};

/// Maximize (-Branin, -Currin) on [0,1]^2.
class BraninCurrinCf final : public SyntheticProblem {
 public:
  std::string name() const override { return "branin-currin-cf"; }
  std::size_t input_dim() const override { return 2; }
  Eigen::VectorXd reference_point() const override;
  Eigen::Vector2d exact(const Eigen::VectorXd& x) const override;
  Eigen::Vector2d bias(const Eigen::VectorXd& x) const override;

  double bias_scale_1 = 20.0;
  double bias_scale_2 = 1.0;
};

/// ZDT1 with both objectives negated for maximization.
class Zdt1Cf final : public SyntheticProblem {
 public:
  explicit Zdt1Cf(std::size_t dim = 30) : dim_(dim) {}
  std::string name() const override { return "zdt1"; }
  std::size_t input_dim() const override { return dim_; }
  Eigen::VectorXd reference_point() const override;
  Eigen::Vector2d exact(const Eigen::VectorXd& x) const override;
  Eigen::Vector2d bias(const Eigen::VectorXd& x) const override;

  /// Points on the true front (f1 in [0,1], f2 = 1 - sqrt(f1)) in maximization orientation.
  static Eigen::MatrixXd true_front(std::size_t points);

  double bias_scale = 0.5;

 private:
  std::size_t dim_;
};

double branin(double x1, double x2);  // x in [0,1]^2, rescaled to the usual domain
double currin(double x1, double x2);

/// Throws std::invalid_argument for unknown names.
std::unique_ptr<SyntheticProblem> synthetic_cf_problem(const std::string& name);

}  // namespace cfmesmo

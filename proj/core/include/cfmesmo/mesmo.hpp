#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cfmesmo/gp.hpp"
#include "cfmesmo/objectives.hpp"
#include "cfmesmo/pareto.hpp"

namespace cfmesmo {

/// gamma * phi(gamma) / (2 Phi(gamma)) - ln Phi(gamma): the entropy lost by
/// truncating a standard normal above at gamma. Nonnegative and decreasing.
double entropy_term(double gamma);

/// A Pareto front of one joint draw of highest-fidelity sample functions.
struct ParetoFrontSample {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd values;   // mutually non-dominated rows
  Eigen::VectorXd maxima;   // per-objective maximum over `values`

  static ParetoFrontSample from_front(const FrontSet& front);
};

/// Raises every sample's maxima to at least `observed_best`. Observations at
/// any fidelity undershoot the highest-fidelity value, so the best observed
/// value bounds every maximum from below.
void floor_maxima(std::vector<ParetoFrontSample>& fronts, const Eigen::VectorXd& observed_best);

struct AcquisitionConfig {
  std::size_t front_samples = 10;
  std::size_t rff_features = 500;
  std::size_t pool_size = 2000;
  std::size_t fidelity_levels = 10;
  double sigma_floor = 1e-9;
  /// Apply floor_maxima with the best value observed so far per objective.
  bool floor_at_observed = true;
  Nsga2Config inner{};

  bool operator==(const AcquisitionConfig&) const = default;
};

/// Draws `samples` joint sample functions (one per model, at the highest
/// fidelity) and solves each multi-objective problem with NSGA-II over [0,1]^d.
std::vector<ParetoFrontSample> sample_pareto_fronts(const std::vector<CfGpModel>& models, std::size_t samples,
                                                    std::size_t rff_features, const Nsga2Config& inner,
                                                    std::uint64_t seed);

/// Information gain per unit cost at (x, z):
///   1/(cost * S) * sum_j sum_s entropy_term((max_sj - mu_j(x, z_j)) / sigma_j(x, z_j)).
double acquisition(const std::vector<CfGpModel>& models, const Eigen::VectorXd& x, const FidelityVector& z,
                   const std::vector<ParetoFrontSample>& fronts, double cost, double sigma_floor = 1e-9);

/// Acquisition for every row of `xs` at one fidelity vector; costs per row.
Eigen::VectorXd acquisition_batch(const std::vector<CfGpModel>& models, const Eigen::MatrixXd& xs,
                                  const FidelityVector& z, const std::vector<ParetoFrontSample>& fronts,
                                  const Eigen::VectorXd& costs, double sigma_floor = 1e-9);

/// Evenly spaced fidelities {0, 1/(n-1), ..., 1}; a single level is {1}.
std::vector<double> fidelity_grid(std::size_t levels);

struct Selection {
  Eigen::VectorXd x;
  FidelityVector z;
  double alpha = 0.0;
  double cost = 0.0;
  std::size_t pool_index = 0;
  std::size_t level = 0;
};

/// Argmax of the acquisition over pool x fidelity grid. Ties go to the lower
/// cost, then the lower pool index, then the lower level.
Selection select_from_pool(const std::vector<CfGpModel>& models, const std::vector<ParetoFrontSample>& fronts,
                           const MooProblem& problem, const Eigen::MatrixXd& pool, const std::vector<double>& grid,
                           double sigma_floor = 1e-9);

/// Random candidate pool of config.pool_size points (canonicalized by the problem).
Eigen::MatrixXd candidate_pool(const MooProblem& problem, std::size_t size, std::uint64_t seed);

Selection select_next(const std::vector<CfGpModel>& models, const std::vector<ParetoFrontSample>& fronts,
                      const MooProblem& problem, const AcquisitionConfig& config, std::uint64_t seed,
                      bool highest_fidelity_only = false);

enum class OptimizerKind { cf_mesmo, mesmo, random, nsga2 };
const char* to_string(OptimizerKind kind);
/// Throws std::invalid_argument for unknown names.
OptimizerKind parse_optimizer(const std::string& name);

struct Budget {
  double total_cost = 60.0;
  std::size_t max_iterations = 100;
  double convergence_epsilon = 1e-3;
  std::size_t convergence_window = 10;
  std::size_t initial_points = 5;

  bool operator==(const Budget&) const = default;
};

struct OptimizerConfig {
  Budget budget{};
  AcquisitionConfig acquisition{};
  GpFitOptions gp{};
  Nsga2Config baseline_nsga2{10, 100, 0.9, 15.0, 20.0, -1.0};
  /// Report fronts over highest-fidelity evaluations only.
  bool highest_fidelity_front = true;

  bool operator==(const OptimizerConfig&) const = default;
};

struct TraceRow {
  std::size_t iteration = 0;  // 0 for initialization rows
  bool initial = false;
  Eigen::VectorXd x;
  FidelityVector z;
  Eigen::VectorXd y;          // empty when failed
  bool failed = false;
  std::string error;
  double alpha = 0.0;
  double cost = 0.0;          // normalized
  double cumulative_cost = 0.0;
  double hypervolume = 0.0;   // of the reportable front after this row
  double cost_seconds = 0.0;
};

/// Evaluation history and surrogates of one run.
struct CampaignState {
  std::vector<TraceRow> history;
  std::vector<CfGpModel> models;
  double cumulative_cost = 0.0;
  std::size_t iteration = 0;
  std::vector<double> hv_window;  // hypervolume after each highest-fidelity loop evaluation
};

struct CampaignResult {
  FrontSet front;
  std::vector<TraceRow> trace;
  bool truncated = false;   // budget exhausted by initialization
  bool converged = false;
  std::string stop_reason;
  std::size_t iterations = 0;
  double total_cost = 0.0;
  nlohmann::json models = nlohmann::json::array();  // last fitted hyperparameters per objective
};

CampaignResult run_optimizer(const MooProblem& problem, OptimizerKind kind, const OptimizerConfig& config,
                             std::uint64_t seed);
CampaignResult run_cf_mesmo(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed);
CampaignResult run_mesmo(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed);
CampaignResult run_random(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed);
CampaignResult run_nsga2_baseline(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed);

/// Cumulative cost at the first trace row whose hypervolume reaches `target`;
/// +infinity if never reached.
double cost_to_reach(const std::vector<TraceRow>& trace, double target);

}  // namespace cfmesmo

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmesmo/config.hpp"
#include "cfmesmo/mesmo.hpp"

namespace cfmesmo {

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  CampaignResult result;
};

struct CampaignOutcome {
  std::vector<SeedOutcome> seeds;  // in config order
  std::vector<std::string> files;  // written paths, sorted
  bool all_completed() const;
};

/// Hypervolume reached by `cost`: that of the last row with cumulative cost <= cost, 0 before the first.
double hypervolume_at_cost(const std::vector<TraceRow>& trace, double cost);

struct HvQuantileRow {
  double cost = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

/// Per grid point quartiles of hypervolume_at_cost across runs (linear interpolation between order statistics).
std::vector<HvQuantileRow> aggregate_hypervolume(const std::vector<std::vector<TraceRow>>& traces,
                                                 const std::vector<double>& cost_grid);

/// `points` evenly spaced costs from 0 to `max_cost` inclusive.
std::vector<double> cost_grid(double max_cost, std::size_t points);

/// Quantile q in [0,1] of `values` with linear interpolation; throws on an empty input.
double quantile(std::vector<double> values, double q);

void write_trace_csv(std::ostream& out, const MooProblem& problem, const CampaignResult& result,
                     const std::string& hash, std::uint64_t seed, bool record_cpu_time);
void write_front_csv(std::ostream& out, const MooProblem& problem, const FrontSet& front, const std::string& hash,
                     std::uint64_t seed);
nlohmann::json campaign_log(const CampaignConfig& config, const MooProblem& problem, const SeedOutcome& outcome);

/// Runs every seed (up to config.workers at a time) and writes per-seed traces,
/// fronts and logs plus the aggregate hypervolume-vs-cost and fidelity files
/// under config.output_dir. Progress goes to `log` when given.
CampaignOutcome run_campaign(const CampaignConfig& config, std::ostream* log = nullptr);

}  // namespace cfmesmo

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmesmo/mesmo.hpp"
#include "cfmesmo/objectives.hpp"

namespace cfmesmo {

/// Everything a campaign run needs. The YAML layout mirrors the nesting below.
struct CampaignConfig {
  std::string problem = "branin-currin-cf";  // reram, branin-currin-cf or zdt1
  std::string optimizer = "cf-mesmo";        // cf-mesmo, mesmo, random or nsga2
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "cfmesmo_out";
  std::size_t workers = 1;
  /// Adds measured CPU seconds to traces; such files are no longer reproducible.
  bool record_cpu_time = false;

  OptimizerConfig optimizer_config{};
  ReramProblemConfig reram{};

  std::size_t zdt1_dim = 6;
  double branin_bias = 20.0;
  double currin_bias = 1.0;
  double zdt1_bias = 0.5;
  SyntheticCostModel synthetic_cost{};

  bool operator==(const CampaignConfig&) const = default;
};

/// Parse or validation failure; the message names the key path and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses YAML text; missing keys keep their defaults, unknown keys are rejected.
CampaignConfig parse_config(const std::string& text);
CampaignConfig load_config(const std::string& path);
/// Full YAML document with every key; parse_config(emit_config(c)) == c.
std::string emit_config(const CampaignConfig& config);
/// Throws ConfigError on semantically invalid values.
void validate_config(const CampaignConfig& config);
/// Copy with output_dir and workers reset: settings that do not change results.
CampaignConfig canonical_config(const CampaignConfig& config);
/// FNV-1a 64 of the emitted canonical config, as 16 hex digits.
std::string config_hash(const CampaignConfig& config);
/// Applies CFMESMO_OUT_DIR and CFMESMO_WORKERS when set.
void apply_environment(CampaignConfig& config);

std::unique_ptr<MooProblem> make_problem(const CampaignConfig& config);

}  // namespace cfmesmo

#pragma once

#include <cstddef>
#include <vector>

#include "cfmesmo/design_space.hpp"
#include "cfmesmo/rng.hpp"

namespace cfmesmo {

inline constexpr double kBoltzmann = 1.380649e-23;         // J/K
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

/// Random telegraph noise: with probability p_occupancy a read sees the
/// conductance shifted by g * (a / (g / g_min) + b).
struct RtnParams {
  double amp_coeff_a = 4e-4;
  double amp_coeff_b = 0.002;
  double p_occupancy = 0.5;

  bool operator==(const RtnParams&) const = default;
};

struct NoiseSources {
  bool thermal = true;
  bool shot = true;
  bool rtn = true;
  bool programming = true;

  static NoiseSources none() { return {false, false, false, false}; }
  static NoiseSources all() { return {}; }
  bool any_read() const { return thermal || shot || rtn; }
  bool operator==(const NoiseSources&) const = default;
};

struct NoiseContext {
  double g = 0.0;  // S
  double v = 1.65; // V, terminal (read) voltage
  double freq_hz = 5e8;
  double temperature_k = 350.0;
  double sigma_prog = 0.0658;
  double g_min = 1.0 / 3.03e6;
  RtnParams rtn{};
  NoiseSources sources{};
};

/// Context for a cell of `design` at conductance g, read at V_r.
NoiseContext make_noise_context(const ReramDesign& design, double g, const RtnParams& rtn = {},
                                NoiseSources sources = {});

double thermal_sigma(const NoiseContext& ctx);
double shot_sigma(const NoiseContext& ctx);
double prog_sigma(const NoiseContext& ctx);
/// Conductance shift applied when the trap is occupied.
double rtn_amplitude(const NoiseContext& ctx);

double rtn_sample(const NoiseContext& ctx, Rng& rng);
/// Thermal + shot + RTN for one read; disabled sources contribute nothing.
double sample_read_noise(const NoiseContext& ctx, Rng& rng);
/// Programming error for one deployment of the cell.
double sample_write_noise(const NoiseContext& ctx, Rng& rng);

/// Variance of thermal + shot noise per siemens of conductance. Both
/// variances are linear in g, so a column of cells read with voltages V_i has
/// current-noise variance read_variance_per_siemens * sum_i V_i^2 g_i.
double read_variance_per_siemens(const NoiseContext& ctx);

enum class NoiseKind { thermal, shot, rtn, programming, combined };
const char* to_string(NoiseKind kind);

struct NoiseHistogramRow {
  int level = 0;
  double g = 0.0;
  NoiseKind kind = NoiseKind::combined;
  double bin_lo = 0.0;  // relative noise dG/G
  double bin_hi = 0.0;
  std::size_t count = 0;
};

/// Histograms of sampled dG/G for every conductance level of a res_cell-bit cell.
std::vector<NoiseHistogramRow> noise_histogram(const ReramDesign& design, const RtnParams& rtn,
                                               std::size_t samples_per_level, std::size_t bins,
                                               Rng& rng);

}  // namespace cfmesmo

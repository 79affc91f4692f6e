#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfmesmo/rng.hpp"

namespace cfmesmo {

/// Fixed device and converter constants shared by every design point.
struct DeviceConstants {
  int bit_quan = 8;         // weight/activation quantization bits
  double r_on = 3.03e3;     // low resistance state, ohm
  double r_off = 3.03e6;    // high resistance state, ohm
  int res_dac = 8;
  int res_adc = 8;          // 0 selects an ideal (infinite resolution) ADC
  double v_r = 1.65;        // read voltage, V
  double sigma_prog = 0.0658;

  double g_min() const { return 1.0 / r_off; }
  double g_max() const { return 1.0 / r_on; }

  bool operator==(const DeviceConstants&) const = default;
};

/// One point of the ReRAM configuration space.
struct ReramDesign {
  int res_cell = 8;
  double freq_hz = 5e8;
  double temperature_k = 350.0;
  int xbar_size = 128;
  DeviceConstants device{};

  bool operator==(const ReramDesign&) const = default;
};

/// Per-variable bounds and ordinal level sets of the design space.
struct DesignBounds {
  std::vector<int> res_cell_levels{1, 2, 3, 4, 8};
  double freq_min_hz = 1e7;
  double freq_max_hz = 1e9;
  double temperature_min_k = 300.0;
  double temperature_max_k = 400.0;
  std::vector<int> xbar_levels{32, 64, 128};
  bool log_frequency = false;

  bool operator==(const DesignBounds&) const = default;
};

inline constexpr std::size_t kDesignDims = 4;

/// Normalized encoding of a design: (res_cell, freq, temperature, xbar_size) in [0,1]^4.
struct DesignVector {
  std::array<double, kDesignDims> coords{};
  bool operator==(const DesignVector&) const = default;
};

/// Per-objective fidelity; 1 is the highest fidelity.
struct FidelityVector {
  std::vector<double> z;

  static FidelityVector highest(std::size_t objectives) { return {std::vector<double>(objectives, 1.0)}; }
  bool is_highest() const;
  bool operator==(const FidelityVector&) const = default;
};

/// Snaps z to the nearest of `levels` evenly spaced fidelities over [0,1].
double snap_fidelity(double z, std::size_t levels);
/// Index in [0, levels) of the snapped fidelity; 1.0 maps to levels-1.
std::size_t fidelity_level(double z, std::size_t levels);

class DesignSpace {
 public:
  DesignSpace() = default;
  DesignSpace(DesignBounds bounds, DeviceConstants device);

  const DesignBounds& bounds() const { return bounds_; }
  const DeviceConstants& device() const { return device_; }

  /// Throws std::invalid_argument naming the offending field.
  void validate(const ReramDesign& d) const;

  DesignVector encode(const ReramDesign& d) const;
  /// Total on [0,1]^4: coordinates are clamped, ordinals snap to the nearest level.
  ReramDesign decode(const DesignVector& v) const;

  std::vector<ReramDesign> sample(std::size_t n, Rng& rng) const;

 private:
  DesignBounds bounds_{};
  DeviceConstants device_{};
};

/// Number of grid points given per-variable level counts.
std::uint64_t space_cardinality(std::span<const std::uint64_t> levels);

std::string to_string(const ReramDesign& d);

}  // namespace cfmesmo

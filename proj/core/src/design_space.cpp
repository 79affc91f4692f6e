#include "cfmesmo/design_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cfmesmo {

namespace {

double ordinal_coord(const std::vector<int>& levels, int value, const char* name) {
  auto it = std::find(levels.begin(), levels.end(), value);
  if (it == levels.end()) {
    throw std::invalid_argument(std::string(name) + "=" + std::to_string(value) + " is not an allowed level");
  }
  if (levels.size() == 1) return 0.0;
  return static_cast<double>(it - levels.begin()) / static_cast<double>(levels.size() - 1);
}

int snap_ordinal(const std::vector<int>& levels, double coord) {
  if (levels.size() == 1) return levels.front();
  const double c = std::clamp(coord, 0.0, 1.0);
  const auto idx = static_cast<std::size_t>(std::lround(c * static_cast<double>(levels.size() - 1)));
  return levels[idx];
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

bool FidelityVector::is_highest() const {
  return std::all_of(z.begin(), z.end(), [](double v) { return v >= 1.0; });
}

double snap_fidelity(double z, std::size_t levels) {
  if (levels <= 1) return 1.0;
  return static_cast<double>(fidelity_level(z, levels)) / static_cast<double>(levels - 1);
}

std::size_t fidelity_level(double z, std::size_t levels) {
  if (levels <= 1) return 0;
  return static_cast<std::size_t>(std::lround(clamp01(z) * static_cast<double>(levels - 1)));
}

DesignSpace::DesignSpace(DesignBounds bounds, DeviceConstants device)
    : bounds_(std::move(bounds)), device_(device) {
  if (bounds_.res_cell_levels.empty() || bounds_.xbar_levels.empty()) {
    throw std::invalid_argument("design space: ordinal level sets must be non-empty");
  }
  if (!std::is_sorted(bounds_.res_cell_levels.begin(), bounds_.res_cell_levels.end()) ||
      !std::is_sorted(bounds_.xbar_levels.begin(), bounds_.xbar_levels.end())) {
    throw std::invalid_argument("design space: ordinal level sets must be ascending");
  }
  if (!(bounds_.freq_min_hz > 0.0 && bounds_.freq_min_hz <= bounds_.freq_max_hz)) {
    throw std::invalid_argument("design space: invalid frequency bounds");
  }
  if (!(bounds_.temperature_min_k > 0.0 && bounds_.temperature_min_k <= bounds_.temperature_max_k)) {
    throw std::invalid_argument("design space: invalid temperature bounds");
  }
  if (!(device_.r_on > 0.0 && device_.r_on < device_.r_off)) {
    throw std::invalid_argument("design space: require 0 < r_on < r_off");
  }
  if (bounds_.res_cell_levels.back() > device_.bit_quan) {
    throw std::invalid_argument("design space: res_cell levels exceed bit_quan");
  }
}

void DesignSpace::validate(const ReramDesign& d) const {
  ordinal_coord(bounds_.res_cell_levels, d.res_cell, "res_cell");
  ordinal_coord(bounds_.xbar_levels, d.xbar_size, "xbar_size");
  if (d.res_cell > d.device.bit_quan) throw std::invalid_argument("res_cell exceeds bit_quan");
  if (!(d.freq_hz >= bounds_.freq_min_hz && d.freq_hz <= bounds_.freq_max_hz)) {
    throw std::invalid_argument("freq_hz out of bounds");
  }
  if (!(d.temperature_k >= bounds_.temperature_min_k && d.temperature_k <= bounds_.temperature_max_k)) {
    throw std::invalid_argument("temperature_k out of bounds");
  }
  if (!(d.device.r_on > 0.0 && d.device.r_on < d.device.r_off)) {
    throw std::invalid_argument("require 0 < r_on < r_off");
  }
}

DesignVector DesignSpace::encode(const ReramDesign& d) const {
  validate(d);
  DesignVector v;
  v.coords[0] = ordinal_coord(bounds_.res_cell_levels, d.res_cell, "res_cell");
  if (bounds_.freq_max_hz == bounds_.freq_min_hz) {
    v.coords[1] = 0.0;
  } else if (bounds_.log_frequency) {
    v.coords[1] = std::log(d.freq_hz / bounds_.freq_min_hz) / std::log(bounds_.freq_max_hz / bounds_.freq_min_hz);
  } else {
    v.coords[1] = (d.freq_hz - bounds_.freq_min_hz) / (bounds_.freq_max_hz - bounds_.freq_min_hz);
  }
  const double t_span = bounds_.temperature_max_k - bounds_.temperature_min_k;
  v.coords[2] = t_span == 0.0 ? 0.0 : (d.temperature_k - bounds_.temperature_min_k) / t_span;
  v.coords[3] = ordinal_coord(bounds_.xbar_levels, d.xbar_size, "xbar_size");
  for (auto& c : v.coords) c = clamp01(c);
  return v;
}

ReramDesign DesignSpace::decode(const DesignVector& v) const {
  ReramDesign d;
  d.device = device_;
  d.res_cell = snap_ordinal(bounds_.res_cell_levels, v.coords[0]);
  const double f = clamp01(v.coords[1]);
  if (bounds_.log_frequency) {
    d.freq_hz = bounds_.freq_min_hz * std::pow(bounds_.freq_max_hz / bounds_.freq_min_hz, f);
  } else {
    d.freq_hz = bounds_.freq_min_hz + f * (bounds_.freq_max_hz - bounds_.freq_min_hz);
  }
  d.freq_hz = std::clamp(d.freq_hz, bounds_.freq_min_hz, bounds_.freq_max_hz);
  d.temperature_k = std::clamp(
      bounds_.temperature_min_k + clamp01(v.coords[2]) * (bounds_.temperature_max_k - bounds_.temperature_min_k),
      bounds_.temperature_min_k, bounds_.temperature_max_k);
  d.xbar_size = snap_ordinal(bounds_.xbar_levels, v.coords[3]);
  return d;
}

std::vector<ReramDesign> DesignSpace::sample(std::size_t n, Rng& rng) const {
  if (n == 0) throw std::invalid_argument("sample_designs: n must be >= 1");
  // Ordinals are drawn uniformly over their levels rather than snapped from a
  // uniform coordinate, which would halve the weight of the end levels.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cell_idx(0, bounds_.res_cell_levels.size() - 1);
  std::uniform_int_distribution<std::size_t> xbar_idx(0, bounds_.xbar_levels.size() - 1);
  std::vector<ReramDesign> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DesignVector v;
    v.coords[1] = u(rng);
    v.coords[2] = u(rng);
    ReramDesign d = decode(v);
    d.res_cell = bounds_.res_cell_levels[cell_idx(rng)];
    d.xbar_size = bounds_.xbar_levels[xbar_idx(rng)];
    out.push_back(d);
  }
  return out;
}

std::uint64_t space_cardinality(std::span<const std::uint64_t> levels) {
  std::uint64_t total = 1;
  for (auto l : levels) total *= l;
  return total;
}

std::string to_string(const ReramDesign& d) {
  std::ostringstream os;
  os << "res_cell=" << d.res_cell << " freq_hz=" << d.freq_hz << " temperature_k=" << d.temperature_k
     << " xbar_size=" << d.xbar_size;
  return os.str();
}

}  // namespace cfmesmo

#include "cfmesmo/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfmesmo {

NoiseContext make_noise_context(const ReramDesign& design, double g, const RtnParams& rtn,
                                NoiseSources sources) {
  NoiseContext ctx;
  ctx.g = g;
  ctx.v = design.device.v_r;
  ctx.freq_hz = design.freq_hz;
  ctx.temperature_k = design.temperature_k;
  ctx.sigma_prog = design.device.sigma_prog;
  ctx.g_min = design.device.g_min();
  ctx.rtn = rtn;
  ctx.sources = sources;
  return ctx;
}

double thermal_sigma(const NoiseContext& ctx) {
  if (ctx.g <= 0.0) return 0.0;
  return std::sqrt(4.0 * ctx.g * ctx.freq_hz * kBoltzmann * ctx.temperature_k) / ctx.v;
}

double shot_sigma(const NoiseContext& ctx) {
  if (ctx.g <= 0.0) return 0.0;
  return std::sqrt(2.0 * ctx.g * ctx.freq_hz * kElementaryCharge * ctx.v) / ctx.v;
}

double prog_sigma(const NoiseContext& ctx) { return ctx.sigma_prog * std::max(ctx.g, 0.0); }

double rtn_amplitude(const NoiseContext& ctx) {
  // g * (a / (g / g_min) + b), written so that g = 0 takes its limit a * g_min.
  return ctx.rtn.amp_coeff_a * ctx.g_min + ctx.rtn.amp_coeff_b * std::max(ctx.g, 0.0);
}

double rtn_sample(const NoiseContext& ctx, Rng& rng) {
  std::bernoulli_distribution occupied(std::clamp(ctx.rtn.p_occupancy, 0.0, 1.0));
  return occupied(rng) ? rtn_amplitude(ctx) : 0.0;
}

double sample_read_noise(const NoiseContext& ctx, Rng& rng) {
  double dg = 0.0;
  if (ctx.sources.thermal) {
    const double s = thermal_sigma(ctx);
    if (s > 0.0) dg += std::normal_distribution<double>(0.0, s)(rng);
  }
  if (ctx.sources.shot) {
    const double s = shot_sigma(ctx);
    if (s > 0.0) dg += std::normal_distribution<double>(0.0, s)(rng);
  }
  if (ctx.sources.rtn) dg += rtn_sample(ctx, rng);
  return dg;
}

double sample_write_noise(const NoiseContext& ctx, Rng& rng) {
  if (!ctx.sources.programming) return 0.0;
  const double s = prog_sigma(ctx);
  if (s <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, s)(rng);
}

double read_variance_per_siemens(const NoiseContext& ctx) {
  NoiseContext unit = ctx;
  unit.g = 1.0;
  double var = 0.0;
  if (ctx.sources.thermal) var += std::pow(thermal_sigma(unit), 2);
  if (ctx.sources.shot) var += std::pow(shot_sigma(unit), 2);
  return var;
}

const char* to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::thermal: return "thermal";
    case NoiseKind::shot: return "shot";
    case NoiseKind::rtn: return "rtn";
    case NoiseKind::programming: return "programming";
    case NoiseKind::combined: return "combined";
  }
  return "unknown";
}

std::vector<NoiseHistogramRow> noise_histogram(const ReramDesign& design, const RtnParams& rtn,
                                               std::size_t samples_per_level, std::size_t bins,
                                               Rng& rng) {
  const int levels = 1 << design.res_cell;
  const double g_min = design.device.g_min();
  const double g_max = design.device.g_max();
  const double step = levels > 1 ? (g_max - g_min) / (levels - 1) : 0.0;
  const NoiseKind kinds[] = {NoiseKind::thermal, NoiseKind::shot, NoiseKind::rtn, NoiseKind::programming,
                             NoiseKind::combined};

  std::vector<NoiseHistogramRow> rows;
  std::vector<double> rel(samples_per_level);
  for (int level = 0; level < levels; ++level) {
    const double g = g_min + level * step;
    for (NoiseKind kind : kinds) {
      NoiseSources src = NoiseSources::none();
      switch (kind) {
        case NoiseKind::thermal: src.thermal = true; break;
        case NoiseKind::shot: src.shot = true; break;
        case NoiseKind::rtn: src.rtn = true; break;
        case NoiseKind::programming: src.programming = true; break;
        case NoiseKind::combined: src = NoiseSources::all(); break;
      }
      const NoiseContext ctx = make_noise_context(design, g, rtn, src);
      for (auto& r : rel) r = (sample_read_noise(ctx, rng) + sample_write_noise(ctx, rng)) / g;
      auto [lo_it, hi_it] = std::minmax_element(rel.begin(), rel.end());
      double lo = *lo_it, hi = *hi_it;
      if (hi <= lo) {
        lo -= 0.5e-12;
        hi += 0.5e-12;
      }
      const double width = (hi - lo) / static_cast<double>(bins);
      std::vector<std::size_t> counts(bins, 0);
      for (double r : rel) {
        auto b = static_cast<std::size_t>((r - lo) / width);
        counts[std::min(b, bins - 1)]++;
      }
      for (std::size_t b = 0; b < bins; ++b) {
        rows.push_back({level, g, kind, lo + width * b, lo + width * (b + 1), counts[b]});
      }
    }
  }
  return rows;
}

}  // namespace cfmesmo

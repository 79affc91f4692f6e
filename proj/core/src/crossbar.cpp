#include "cfmesmo/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cfmesmo {

namespace {

Eigen::Index tile_count(Eigen::Index n, int xbar) { return (n + xbar - 1) / xbar; }

// Bernoulli draws for RTN occupancy. p = 1/2 (the default) consumes one bit
// of engine output per draw instead of one engine call.
class OccupancySource {
 public:
  OccupancySource(Rng& rng, double p) : rng_(rng), p_(std::clamp(p, 0.0, 1.0)), dist_(p_) {}

  bool next() {
    if (p_ == 0.5) {
      if (left_ == 0) {
        bits_ = rng_();
        left_ = 64;
      }
      const bool b = bits_ & 1u;
      bits_ >>= 1;
      --left_;
      return b;
    }
    return dist_(rng_);
  }

 private:
  Rng& rng_;
  double p_;
  std::bernoulli_distribution dist_;
  std::uint64_t bits_ = 0;
  int left_ = 0;
};

}  // namespace

std::int32_t max_code_for_bits(int bits) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("quantize: bits must be in [1, 16]");
  return std::max<std::int32_t>(1, (1 << (bits - 1)) - 1);
}

std::int32_t QuantizedMatrix::max_code() const { return max_code_for_bits(bits); }

Eigen::MatrixXd QuantizedMatrix::dequantize() const { return codes.cast<double>() * scale; }

QuantizedMatrix quantize(const Eigen::MatrixXd& values, int bits) {
  QuantizedMatrix q;
  q.bits = bits;
  const std::int32_t top = max_code_for_bits(bits);
  const double max_abs = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  q.scale = max_abs > 0.0 ? max_abs / top : 1.0;
  q.codes = values.unaryExpr([&](double v) {
    const double c = std::nearbyint(v / q.scale);
    return static_cast<std::int32_t>(std::clamp(c, -static_cast<double>(top), static_cast<double>(top)));
  });
  return q;
}

QuantizedMatrix quantize_rows(const Eigen::MatrixXd& values, int bits, Eigen::VectorXd& row_scales) {
  QuantizedMatrix q;
  q.bits = bits;
  q.scale = 1.0;
  const std::int32_t top = max_code_for_bits(bits);
  q.codes.resize(values.rows(), values.cols());
  row_scales.resize(values.rows());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const double max_abs = values.cols() ? values.row(r).cwiseAbs().maxCoeff() : 0.0;
    const double scale = max_abs > 0.0 ? max_abs / top : 1.0;
    row_scales[r] = scale;
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double code = std::clamp(std::nearbyint(values(r, c) / scale), -static_cast<double>(top),
                                     static_cast<double>(top));
      q.codes(r, c) = static_cast<std::int32_t>(code);
    }
  }
  return q;
}

ReadSettings ReadSettings::at_design(const ReramDesign& d, const NoiseSources& sources, const RtnParams& rtn) {
  ReadSettings r;
  r.sources = sources;
  r.rtn = rtn;
  r.freq_hz = d.freq_hz;
  r.temperature_k = d.temperature_k;
  return r;
}

std::size_t slices_per_weight(int bit_quan, int res_cell) {
  if (res_cell < 1 || bit_quan < 1) throw std::invalid_argument("slices_per_weight: resolutions must be >= 1");
  return static_cast<std::size_t>((bit_quan + res_cell - 1) / res_cell);
}

std::int32_t slice_digit(std::int32_t magnitude, std::size_t slice, std::size_t slices, int res_cell) {
  const int shift = res_cell * static_cast<int>(slices - 1 - slice);
  return (magnitude >> shift) & ((1 << res_cell) - 1);
}

double MappedLayer::level_step() const {
  const int levels = (1 << design_.res_cell) - 1;
  return (design_.device.g_max() - design_.device.g_min()) / levels;
}

MappedLayer MappedLayer::map(const QuantizedMatrix& weights, const ReramDesign& design, std::size_t duplication) {
  if (weights.rows() == 0 || weights.cols() == 0) throw std::invalid_argument("map_weights: empty weight matrix");
  if (duplication == 0) throw std::invalid_argument("map_weights: duplication must be >= 1");
  if (design.res_cell < 1 || design.xbar_size < 1) throw std::invalid_argument("map_weights: invalid design");

  MappedLayer layer;
  layer.design_ = design;
  layer.rows_ = weights.rows();
  layer.cols_ = weights.cols();
  layer.slices_ = slices_per_weight(design.device.bit_quan, design.res_cell);
  layer.duplication_ = duplication;

  const int capacity_bits = static_cast<int>(layer.slices_) * design.res_cell;
  const std::int64_t max_mag = weights.codes.size() ? weights.codes.cwiseAbs().maxCoeff() : 0;
  if (capacity_bits < 31 && max_mag >= (std::int64_t{1} << capacity_bits)) {
    throw std::invalid_argument("map_weights: weight codes exceed bit_quan magnitude range");
  }

  const double g_min = design.device.g_min();
  const double step = layer.level_step();
  const int xbar = design.xbar_size;
  const Eigen::Index row_tiles = tile_count(layer.rows_, xbar);
  const Eigen::Index col_tiles = tile_count(layer.cols_, xbar);

  layer.tiles_.reserve(duplication * layer.slices_ * 2 * row_tiles * col_tiles);
  for (std::size_t copy = 0; copy < duplication; ++copy) {
    for (std::size_t s = 0; s < layer.slices_; ++s) {
      for (int side = 0; side < 2; ++side) {
        for (Eigen::Index rt = 0; rt < row_tiles; ++rt) {
          for (Eigen::Index ct = 0; ct < col_tiles; ++ct) {
            CrossbarTile tile;
            tile.copy = copy;
            tile.slice = s;
            tile.negative = side == 1;
            tile.row_offset = rt * xbar;
            tile.col_offset = ct * xbar;
            const Eigen::Index nr = std::min<Eigen::Index>(xbar, layer.rows_ - tile.row_offset);
            const Eigen::Index nc = std::min<Eigen::Index>(xbar, layer.cols_ - tile.col_offset);
            tile.g.target.resize(nr, nc);
            for (Eigen::Index c = 0; c < nc; ++c) {
              for (Eigen::Index r = 0; r < nr; ++r) {
                const std::int32_t code = weights.codes(tile.row_offset + r, tile.col_offset + c);
                const bool on_this_side = tile.negative ? code < 0 : code > 0;
                const std::int32_t digit =
                    on_this_side ? slice_digit(std::abs(code), s, layer.slices_, design.res_cell) : 0;
                tile.g.target(r, c) = g_min + digit * step;
              }
            }
            layer.tiles_.push_back(std::move(tile));
          }
        }
      }
    }
  }
  return layer;
}

void MappedLayer::program(Rng& rng, const NoiseSources& sources) {
  const double g_max = design_.device.g_max();
  const double sigma = design_.device.sigma_prog;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& tile : tiles_) {
    tile.g.noisy = tile.g.target;
    if (!sources.programming || sigma == 0.0) continue;
    for (Eigen::Index c = 0; c < tile.g.noisy.cols(); ++c) {
      for (Eigen::Index r = 0; r < tile.g.noisy.rows(); ++r) {
        const double g = tile.g.target(r, c);
        tile.g.noisy(r, c) = std::clamp(g + sigma * g * unit(rng), 0.0, g_max);
      }
    }
  }
  programmed_ = true;
}

Eigen::MatrixXd MappedLayer::run_copy(const CodeMatrix& mag_pos, const CodeMatrix& mag_neg, int input_bits,
                                      std::size_t copy, Rng& rng, const ReadSettings& read) const {
  const auto& dev = design_.device;
  const Eigen::Index batch = mag_pos.rows();
  const int xbar = design_.xbar_size;
  const Eigen::Index row_tiles = tile_count(rows_, xbar);
  const Eigen::Index col_tiles = tile_count(cols_, xbar);
  const std::size_t per_side = static_cast<std::size_t>(row_tiles * col_tiles);

  // DAC: magnitudes map to [0, v_r]. When the DAC has fewer levels than the
  // input magnitude range, magnitudes are requantized and the output rescaled.
  const std::int32_t in_max = max_code_for_bits(input_bits);
  const std::int64_t dac_levels = (std::int64_t{1} << dev.res_dac) - 1;
  const bool dac_exact = dac_levels >= in_max;
  const double dac_full = dac_exact ? static_cast<double>(in_max) : static_cast<double>(dac_levels);
  const double dac_gain = dac_exact ? 1.0 : static_cast<double>(in_max) / static_cast<double>(dac_levels);
  auto to_dac = [&](std::int32_t m) -> double {
    if (dac_exact) return m;
    return std::nearbyint(static_cast<double>(m) * dac_levels / in_max);
  };

  const bool ideal_adc = dev.res_adc <= 0;
  const std::int64_t adc_top = ideal_adc ? 0 : (std::int64_t{1} << dev.res_adc) - 1;
  const double unit = level_step() * dev.v_r / dac_full;  // current of one (input level x digit) product

  NoiseContext ctx;
  ctx.v = dev.v_r;
  ctx.freq_hz = read.freq_hz;
  ctx.temperature_k = read.temperature_k;
  ctx.sigma_prog = dev.sigma_prog;
  ctx.g_min = dev.g_min();
  ctx.rtn = read.rtn;
  ctx.sources = read.sources;
  const double var_per_s = read_variance_per_siemens(ctx);
  const bool gaussian_read = var_per_s > 0.0;
  const bool rtn_read = read.sources.rtn && read.rtn.p_occupancy > 0.0;
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  OccupancySource occupancy(rng, read.rtn.p_occupancy);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(batch, cols_);
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> acc;
  Eigen::MatrixXd acc_ideal;

  for (Eigen::Index rt = 0; rt < row_tiles; ++rt) {
    const Eigen::Index r0 = rt * xbar;
    const Eigen::Index nr = std::min<Eigen::Index>(xbar, rows_ - r0);
    if (ideal_adc) {
      acc_ideal.setZero(batch, cols_);
    } else {
      acc.setZero(batch, cols_);
    }
    const double lsb = ideal_adc ? 0.0 : dev.v_r * dev.g_max() * static_cast<double>(nr) / static_cast<double>(adc_top);

    for (int phase = 0; phase < 2; ++phase) {
      const CodeMatrix& mags = phase == 0 ? mag_pos : mag_neg;
      const auto block = mags.middleCols(r0, nr);
      if ((block.array() == 0).all()) continue;
      const std::int64_t phase_sign = phase == 0 ? 1 : -1;
      Eigen::MatrixXd volts(batch, nr);
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index i = 0; i < nr; ++i) volts(b, i) = dev.v_r * to_dac(block(b, i)) / dac_full;
      }
      Eigen::MatrixXd volts_sq;
      if (gaussian_read) volts_sq = volts.array().square().matrix();

      for (std::size_t s = 0; s < slices_; ++s) {
        const std::int64_t weight = std::int64_t{1} << (design_.res_cell * static_cast<int>(slices_ - 1 - s));
        for (int side = 0; side < 2; ++side) {
          const std::int64_t sign = (side == 0 ? 1 : -1) * phase_sign;
          for (Eigen::Index ct = 0; ct < col_tiles; ++ct) {
            const std::size_t idx =
                ((copy * slices_ + s) * 2 + static_cast<std::size_t>(side)) * per_side + rt * col_tiles + ct;
            const CrossbarTile& tile = tiles_[idx];
            const Eigen::MatrixXd& g = tile.g.noisy;
            Eigen::MatrixXd current = volts * g;
            if (gaussian_read) {
              const Eigen::MatrixXd var = (volts_sq * g) * var_per_s;
              for (Eigen::Index j = 0; j < current.cols(); ++j) {
                for (Eigen::Index b = 0; b < batch; ++b) current(b, j) += std::sqrt(var(b, j)) * unit_normal(rng);
              }
            }
            if (rtn_read) {
              // Unbiased cells (zero input voltage) carry no RTN current and draw nothing.
              const Eigen::MatrixXd amp = g.unaryExpr([&](double gij) {
                ctx.g = gij;
                return rtn_amplitude(ctx);
              });
              for (Eigen::Index j = 0; j < g.cols(); ++j) {
                for (Eigen::Index b = 0; b < batch; ++b) {
                  double shift = 0.0;
                  for (Eigen::Index i = 0; i < nr; ++i) {
                    const double v = volts(b, i);
                    if (v != 0.0 && occupancy.next()) shift += v * amp(i, j);
                  }
                  current(b, j) += shift;
                }
              }
            }
            if (ideal_adc) {
              acc_ideal.middleCols(tile.col_offset, g.cols()) +=
                  current * (static_cast<double>(sign * weight) / unit);
            } else {
              for (Eigen::Index j = 0; j < g.cols(); ++j) {
                for (Eigen::Index b = 0; b < batch; ++b) {
                  const double level = std::nearbyint(current(b, j) / lsb);
                  const auto code = static_cast<std::int64_t>(std::clamp(level, 0.0, static_cast<double>(adc_top)));
                  acc(b, tile.col_offset + j) += sign * weight * code;
                }
              }
            }
          }
        }
      }
    }
    if (ideal_adc) {
      out += acc_ideal;
    } else {
      out += acc.cast<double>() * (lsb / unit);
    }
  }
  if (dac_gain != 1.0) out *= dac_gain;
  return out;
}

namespace {

void split_signs(const QuantizedMatrix& inputs, CodeMatrix& pos, CodeMatrix& neg) {
  pos = inputs.codes.cwiseMax(0);
  neg = (-inputs.codes).cwiseMax(0);
}

}  // namespace

Eigen::MatrixXd MappedLayer::mvm_on_copy(const QuantizedMatrix& inputs, std::size_t copy, Rng& rng,
                                         const ReadSettings& read) const {
  if (!programmed_) throw std::logic_error("mvm: layer has not been programmed");
  if (inputs.cols() != rows_) throw std::invalid_argument("mvm: input length does not match crossbar rows");
  if (copy >= duplication_) throw std::out_of_range("mvm: copy index out of range");
  CodeMatrix pos, neg;
  split_signs(inputs, pos, neg);
  return run_copy(pos, neg, inputs.bits, copy, rng, read);
}

Eigen::MatrixXd MappedLayer::mvm(const QuantizedMatrix& inputs, Rng& rng, const ReadSettings& read) const {
  if (duplication_ == 1) return mvm_on_copy(inputs, 0, rng, read);
  if (!programmed_) throw std::logic_error("mvm: layer has not been programmed");
  if (inputs.cols() != rows_) throw std::invalid_argument("mvm: input length does not match crossbar rows");
  Eigen::MatrixXd out(inputs.rows(), cols_);
  for (std::size_t copy = 0; copy < duplication_; ++copy) {
    std::vector<Eigen::Index> served;
    for (Eigen::Index b = static_cast<Eigen::Index>(copy); b < inputs.rows(); b += static_cast<Eigen::Index>(duplication_)) {
      served.push_back(b);
    }
    if (served.empty()) continue;
    QuantizedMatrix part;
    part.bits = inputs.bits;
    part.scale = inputs.scale;
    part.codes = inputs.codes(served, Eigen::all);
    CodeMatrix pos, neg;
    split_signs(part, pos, neg);
    const Eigen::MatrixXd res = run_copy(pos, neg, part.bits, copy, rng, read);
    for (std::size_t k = 0; k < served.size(); ++k) out.row(served[k]) = res.row(static_cast<Eigen::Index>(k));
  }
  return out;
}

Eigen::MatrixXd MappedLayer::mvm_mean_over_copies(const QuantizedMatrix& inputs, Rng& rng,
                                                  const ReadSettings& read) const {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(inputs.rows(), cols_);
  for (std::size_t copy = 0; copy < duplication_; ++copy) sum += mvm_on_copy(inputs, copy, rng, read);
  return sum / static_cast<double>(duplication_);
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto nr = static_cast<Eigen::Index>(j.size());
  const auto nc = nr ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != nc) throw std::invalid_argument("layer json: ragged matrix");
    for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json MappedLayer::to_json() const {
  nlohmann::json j;
  const auto& d = design_;
  j["design"] = {{"res_cell", d.res_cell},         {"freq_hz", d.freq_hz},
                 {"temperature_k", d.temperature_k}, {"xbar_size", d.xbar_size},
                 {"bit_quan", d.device.bit_quan},    {"r_on", d.device.r_on},
                 {"r_off", d.device.r_off},          {"res_dac", d.device.res_dac},
                 {"res_adc", d.device.res_adc},      {"v_r", d.device.v_r},
                 {"sigma_prog", d.device.sigma_prog}};
  j["rows"] = rows_;
  j["cols"] = cols_;
  j["slices"] = slices_;
  j["duplication"] = duplication_;
  j["programmed"] = programmed_;
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : tiles_) {
    nlohmann::json jt = {{"copy", t.copy},
                         {"slice", t.slice},
                         {"negative", t.negative},
                         {"row_offset", t.row_offset},
                         {"col_offset", t.col_offset},
                         {"target", matrix_to_json(t.g.target)}};
    if (programmed_) jt["noisy"] = matrix_to_json(t.g.noisy);
    tiles.push_back(std::move(jt));
  }
  j["tiles"] = std::move(tiles);
  return j;
}

MappedLayer MappedLayer::from_json(const nlohmann::json& j) {
  MappedLayer layer;
  const auto& jd = j.at("design");
  auto& d = layer.design_;
  d.res_cell = jd.at("res_cell").get<int>();
  d.freq_hz = jd.at("freq_hz").get<double>();
  d.temperature_k = jd.at("temperature_k").get<double>();
  d.xbar_size = jd.at("xbar_size").get<int>();
  d.device.bit_quan = jd.at("bit_quan").get<int>();
  d.device.r_on = jd.at("r_on").get<double>();
  d.device.r_off = jd.at("r_off").get<double>();
  d.device.res_dac = jd.at("res_dac").get<int>();
  d.device.res_adc = jd.at("res_adc").get<int>();
  d.device.v_r = jd.at("v_r").get<double>();
  d.device.sigma_prog = jd.at("sigma_prog").get<double>();
  layer.rows_ = j.at("rows").get<Eigen::Index>();
  layer.cols_ = j.at("cols").get<Eigen::Index>();
  layer.slices_ = j.at("slices").get<std::size_t>();
  layer.duplication_ = j.at("duplication").get<std::size_t>();
  layer.programmed_ = j.at("programmed").get<bool>();
  for (const auto& jt : j.at("tiles")) {
    CrossbarTile t;
    t.copy = jt.at("copy").get<std::size_t>();
    t.slice = jt.at("slice").get<std::size_t>();
    t.negative = jt.at("negative").get<bool>();
    t.row_offset = jt.at("row_offset").get<Eigen::Index>();
    t.col_offset = jt.at("col_offset").get<Eigen::Index>();
    t.g.target = matrix_from_json(jt.at("target"));
    if (layer.programmed_) t.g.noisy = matrix_from_json(jt.at("noisy"));
    layer.tiles_.push_back(std::move(t));
  }
  const Eigen::Index expected = static_cast<Eigen::Index>(layer.duplication_ * layer.slices_ * 2) *
                                tile_count(layer.rows_, d.xbar_size) * tile_count(layer.cols_, d.xbar_size);
  if (static_cast<Eigen::Index>(layer.tiles_.size()) != expected) {
    throw std::invalid_argument("layer json: tile count does not match geometry");
  }
  return layer;
}

}  // namespace cfmesmo

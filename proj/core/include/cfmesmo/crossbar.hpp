#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cfmesmo/design_space.hpp"
#include "cfmesmo/noise.hpp"
#include "cfmesmo/rng.hpp"

namespace cfmesmo {

using CodeMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Symmetric uniformly quantized matrix: value ~= code * scale.
struct QuantizedMatrix {
  CodeMatrix codes;
  double scale = 1.0;
  int bits = 8;

  Eigen::Index rows() const { return codes.rows(); }
  Eigen::Index cols() const { return codes.cols(); }
  /// Largest representable magnitude, 2^(bits-1)-1 (1 for single-bit codes).
  std::int32_t max_code() const;
  Eigen::MatrixXd dequantize() const;
};

std::int32_t max_code_for_bits(int bits);

/// Max |value| maps to max_code; an all-zero matrix gets scale 1.
QuantizedMatrix quantize(const Eigen::MatrixXd& values, int bits);
/// Quantizes every row with its own scale (activations, one scale per sample).
QuantizedMatrix quantize_rows(const Eigen::MatrixXd& values, int bits, Eigen::VectorXd& row_scales);

struct ConductanceMatrix {
  Eigen::MatrixXd target;
  Eigen::MatrixXd noisy;  // empty until programmed
};

/// One physical crossbar: a block of one bit slice on one side of the
/// differential pair, for one duplicate copy.
struct CrossbarTile {
  std::size_t copy = 0;
  std::size_t slice = 0;  // 0 is the most significant digit
  bool negative = false;
  Eigen::Index row_offset = 0;
  Eigen::Index col_offset = 0;
  ConductanceMatrix g;
};

/// Read-time conditions for an mvm call. Thermal/shot noise uses freq_hz and
/// temperature_k here, which may differ from the design point (reduced-noise
/// classifier context).
struct ReadSettings {
  NoiseSources sources = NoiseSources::none();
  RtnParams rtn{};
  double freq_hz = 5e8;
  double temperature_k = 350.0;

  static ReadSettings noiseless() { return {}; }
  static ReadSettings at_design(const ReramDesign& d, const NoiseSources& sources, const RtnParams& rtn = {});
};

/// Integer digit of |code| stored in `slice` (big-endian over `slices` digits).
std::int32_t slice_digit(std::int32_t magnitude, std::size_t slice, std::size_t slices, int res_cell);
std::size_t slices_per_weight(int bit_quan, int res_cell);

/// A quantized weight matrix deployed on bit-sliced differential crossbars.
/// Crossbar rows carry inputs and columns carry outputs, so the matrix is
/// (inputs x outputs).
class MappedLayer {
 public:
  static MappedLayer map(const QuantizedMatrix& weights, const ReramDesign& design, std::size_t duplication = 1);

  /// Draws fresh programming noise for every cell of every copy; noiseless
  /// programming when `sources.programming` is false.
  void program(Rng& rng, const NoiseSources& sources);

  /// Integer-domain product sum_i input_i * weight_ij for every row of `inputs`
  /// (batch x rows). Row b is served by copy b % duplication.
  Eigen::MatrixXd mvm(const QuantizedMatrix& inputs, Rng& rng, const ReadSettings& read) const;
  /// Same input fed to one specific copy.
  Eigen::MatrixXd mvm_on_copy(const QuantizedMatrix& inputs, std::size_t copy, Rng& rng,
                              const ReadSettings& read) const;
  /// Same input fed to every copy; outputs averaged.
  Eigen::MatrixXd mvm_mean_over_copies(const QuantizedMatrix& inputs, Rng& rng, const ReadSettings& read) const;

  const ReramDesign& design() const { return design_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t slices() const { return slices_; }
  std::size_t duplication() const { return duplication_; }
  bool programmed() const { return programmed_; }
  const std::vector<CrossbarTile>& tiles() const { return tiles_; }
  std::size_t crossbar_count() const { return tiles_.size(); }
  /// Conductance step between adjacent levels.
  double level_step() const;

  nlohmann::json to_json() const;
  static MappedLayer from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd run_copy(const CodeMatrix& magnitudes_pos, const CodeMatrix& magnitudes_neg, int input_bits,
                           std::size_t copy, Rng& rng, const ReadSettings& read) const;

  ReramDesign design_{};
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::size_t slices_ = 1;
  std::size_t duplication_ = 1;
  bool programmed_ = false;
  std::vector<CrossbarTile> tiles_;
};

}  // namespace cfmesmo

#include "cfmesmo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cfmesmo/crossbar.hpp"

namespace cfmesmo {

NetworkSpec NetworkSpec::from_mlp(const MlpSpec& mlp, bool voting) {
  NetworkSpec net;
  for (std::size_t l = 0; l + 1 < mlp.widths.size(); ++l) {
    LayerSpec layer;
    layer.rows = mlp.widths[l];
    layer.cols = mlp.widths[l + 1];
    if (l + 2 == mlp.widths.size() && voting) layer.voting_copies = mlp.voting_copies;
    net.layers.push_back(layer);
  }
  return net;
}

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

double bit_scale(int bits) { return std::ldexp(1.0, (bits > 0 ? bits : 8) - 8); }

}  // namespace

HwBreakdown hw_breakdown(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params) {
  if (design.xbar_size < 1 || design.freq_hz <= 0.0) throw std::invalid_argument("hw: invalid design");
  if (params.cols_per_adc == 0) throw std::invalid_argument("hw: cols_per_adc must be >= 1");
  const auto& dev = design.device;
  const auto x = static_cast<std::size_t>(design.xbar_size);
  const std::size_t slices = slices_per_weight(dev.bit_quan, design.res_cell);
  const std::size_t adcs_per_tile = ceil_div(x, params.cols_per_adc);
  const double adc_area = params.adc_area_um2 * bit_scale(dev.res_adc);
  const double adc_energy = params.adc_energy_j * bit_scale(dev.res_adc);
  const double tile_area_um2 = static_cast<double>(x * x) * params.cell_area_um2 +
                               static_cast<double>(adcs_per_tile) * adc_area +
                               static_cast<double>(x) * params.dac_area_um2 * dev.res_dac;
  const double g_mid = 0.5 * (dev.g_min() + dev.g_max());

  HwBreakdown hw;
  for (const auto& layer : net.layers) {
    if (layer.rows == 0 || layer.cols == 0 || layer.duplication == 0 || layer.voting_copies == 0) {
      throw std::invalid_argument("hw: layer dimensions and copy counts must be >= 1");
    }
    const std::size_t row_tiles = ceil_div(layer.rows, x);
    const std::size_t col_tiles = ceil_div(layer.cols, x);
    hw.crossbars += layer.duplication * layer.voting_copies * slices * row_tiles * col_tiles * 2;

    const std::size_t mux = ceil_div(std::min(layer.cols, x), adcs_per_tile);
    hw.cycles += static_cast<double>(ceil_div(layer.vectors_per_inference, layer.duplication)) *
                 (params.read_cycles + static_cast<double>(mux));

    const double mvms = static_cast<double>(layer.vectors_per_inference * layer.voting_copies);
    const double cells = static_cast<double>(slices * 2 * layer.rows * layer.cols);
    const double conversions = static_cast<double>(slices * 2 * row_tiles * layer.cols);
    const double drives = static_cast<double>(slices * 2 * col_tiles * layer.rows) * dev.res_dac;
    hw.crossbar_energy_j += mvms * cells * dev.v_r * dev.v_r * g_mid / design.freq_hz;
    hw.converter_energy_j += mvms * (conversions * adc_energy + drives * params.dac_energy_j);
  }
  hw.area_mm2 = static_cast<double>(hw.crossbars) * tile_area_um2 * 1e-6;
  hw.latency_s = hw.cycles / design.freq_hz;
  return hw;
}

std::size_t crossbar_count(const ReramDesign& design, const NetworkSpec& net) {
  return hw_breakdown(design, net, HwCostParams{}).crossbars;
}

double hw_area(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params) {
  return -hw_breakdown(design, net, params).area_mm2;
}
double hw_latency(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params) {
  return -hw_breakdown(design, net, params).latency_s;
}
double hw_energy(const ReramDesign& design, const NetworkSpec& net, const HwCostParams& params) {
  return -hw_breakdown(design, net, params).energy_j();
}

std::vector<std::string> MooProblem::input_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < input_dim(); ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

std::vector<double> MooProblem::describe(const Eigen::VectorXd& x) const { return {x.data(), x.data() + x.size()}; }

std::vector<std::string> MooProblem::objective_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < num_objectives(); ++j) names.push_back("y" + std::to_string(j + 1));
  return names;
}

double MooProblem::normalized_cost(const Eigen::VectorXd& x, const FidelityVector& z) const {
  if (z.z.size() != num_objectives()) throw std::invalid_argument("normalized_cost: fidelity vector size mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < num_objectives(); ++j) total += objective_cost(j, x, z.z[j]) / objective_cost(j, x, 1.0);
  return total;
}

FidelityVector MooProblem::fidelity(double z) const {
  FidelityVector f = FidelityVector::highest(num_objectives());
  const auto bearing = fidelity_bearing();
  for (std::size_t j = 0; j < f.z.size(); ++j) {
    if (bearing[j]) f.z[j] = z;
  }
  return f;
}

ReramProblem::ReramProblem(ReramProblemConfig config)
    : config_(std::move(config)), space_(config_.bounds, config_.device) {
  const auto& acc = config_.accuracy;
  data_ = acc.train_csv.empty() ? make_blobs(acc.data, acc.data_seed) : load_csv_dataset(acc.train_csv, acc.test_csv);
  acc.mlp.validate();
  net_ = NetworkSpec::from_mlp(config_.accuracy.mlp, config_.accuracy.voting);

  // Worst value of each cost over the corners of the design space.
  Eigen::Vector3d worst = Eigen::Vector3d::Zero();
  for (int rc : config_.bounds.res_cell_levels) {
    for (int xb : config_.bounds.xbar_levels) {
      for (double f : {config_.bounds.freq_min_hz, config_.bounds.freq_max_hz}) {
        ReramDesign d;
        d.res_cell = rc;
        d.xbar_size = xb;
        d.freq_hz = f;
        d.temperature_k = config_.bounds.temperature_min_k;
        d.device = config_.device;
        const HwBreakdown hw = hw_breakdown(d, net_, config_.hw);
        worst = worst.cwiseMax(Eigen::Vector3d(hw.area_mm2, hw.latency_s, hw.energy_j()));
      }
    }
  }
  reference_.resize(4);
  reference_ << 0.0, -worst * (1.0 + config_.reference_margin);
}

ReramDesign ReramProblem::design_of(const Eigen::VectorXd& x) const {
  if (x.size() != static_cast<Eigen::Index>(kDesignDims)) throw std::invalid_argument("reram: expected a 4-d design vector");
  DesignVector v;
  for (std::size_t i = 0; i < kDesignDims; ++i) v.coords[i] = x[static_cast<Eigen::Index>(i)];
  return space_.decode(v);
}

Eigen::VectorXd ReramProblem::canonicalize(const Eigen::VectorXd& x) const {
  const DesignVector v = space_.encode(design_of(x));
  return Eigen::Map<const Eigen::VectorXd>(v.coords.data(), kDesignDims);
}

Evaluation ReramProblem::evaluate(const Eigen::VectorXd& x, const FidelityVector& z, std::uint64_t seed) const {
  if (z.z.size() != 4) throw std::invalid_argument("reram: expected 4 fidelities");
  const ReramDesign d = design_of(x);
  const AccuracyEvaluation acc = accuracy_objective(d, z.z[0], config_.accuracy, data_, seed);
  const HwBreakdown hw = hw_breakdown(d, net_, config_.hw);
  Evaluation ev;
  ev.y.resize(4);
  ev.y << acc.accuracy, -hw.area_mm2, -hw.latency_s, -hw.energy_j();
  ev.cost_seconds = acc.cost_seconds;
  ev.detail = acc.per_run;
  return ev;
}

double ReramProblem::objective_cost(std::size_t j, const Eigen::VectorXd&, double z) const {
  if (j >= 4) throw std::out_of_range("reram: objective index");
  return j == 0 ? static_cast<double>(epochs_for_fidelity(z)) : 1.0;
}

std::vector<std::string> ReramProblem::input_names() const {
  return {"res_cell", "freq_hz", "temperature_k", "xbar_size"};
}

std::vector<double> ReramProblem::describe(const Eigen::VectorXd& x) const {
  const ReramDesign d = design_of(x);
  return {static_cast<double>(d.res_cell), d.freq_hz, d.temperature_k, static_cast<double>(d.xbar_size)};
}

std::vector<std::string> ReramProblem::objective_names() const {
  return {"accuracy", "neg_area_mm2", "neg_latency_s", "neg_energy_j"};
}

Eigen::Vector2d SyntheticProblem::at_fidelity(const Eigen::VectorXd& x, double z1, double z2) const {
  if (!(z1 >= 0.0 && z1 <= 1.0 && z2 >= 0.0 && z2 <= 1.0)) throw std::invalid_argument("fidelity must lie in [0,1]");
  const Eigen::Vector2d f = exact(x);
  const Eigen::Vector2d b = bias(x);
  return {f[0] - (1.0 - z1) * b[0], f[1] - (1.0 - z2) * b[1]};
}

Evaluation SyntheticProblem::evaluate(const Eigen::VectorXd& x, const FidelityVector& z, std::uint64_t) const {
  if (x.size() != static_cast<Eigen::Index>(input_dim())) throw std::invalid_argument(name() + ": wrong input dimension");
  if (z.z.size() != 2) throw std::invalid_argument(name() + ": expected 2 fidelities");
  Evaluation ev;
  ev.y = at_fidelity(x, z.z[0], z.z[1]);
  return ev;
}

double SyntheticProblem::objective_cost(std::size_t j, const Eigen::VectorXd&, double z) const {
  if (j >= 2) throw std::out_of_range("synthetic: objective index");
  return cost_model.c0 + cost_model.c1 * z;
}

double branin(double x1, double x2) {
  const double a = 15.0 * x1 - 5.0;
  const double b = 15.0 * x2;
  const double pi = std::numbers::pi;
  const double t = b - 5.1 / (4.0 * pi * pi) * a * a + 5.0 / pi * a - 6.0;
  return t * t + 10.0 * (1.0 - 1.0 / (8.0 * pi)) * std::cos(a) + 10.0;
}

double currin(double x1, double x2) {
  const double factor = x2 > 0.0 ? 1.0 - std::exp(-1.0 / (2.0 * x2)) : 1.0;
  const double num = 2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
  const double den = 100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
  return factor * num / den;
}

Eigen::VectorXd BraninCurrinCf::reference_point() const { return Eigen::Vector2d(-18.0, -6.0); }

Eigen::Vector2d BraninCurrinCf::exact(const Eigen::VectorXd& x) const {
  return {-branin(x[0], x[1]), -currin(x[0], x[1])};
}

Eigen::Vector2d BraninCurrinCf::bias(const Eigen::VectorXd& x) const {
  const double shape = 1.0 + x[0] * x[1];
  return {bias_scale_1 * shape, bias_scale_2 * shape};
}

Eigen::VectorXd Zdt1Cf::reference_point() const { return Eigen::Vector2d(-1.1, -1.1); }

Eigen::Vector2d Zdt1Cf::exact(const Eigen::VectorXd& x) const {
  const double f1 = x[0];
  double g = 1.0;
  if (x.size() > 1) g += 9.0 * x.tail(x.size() - 1).sum() / static_cast<double>(x.size() - 1);
  const double f2 = g * (1.0 - std::sqrt(f1 / g));
  return {-f1, -f2};
}

Eigen::Vector2d Zdt1Cf::bias(const Eigen::VectorXd& x) const {
  const double shape = bias_scale * (1.0 + x.mean());
  return {shape, shape};
}

Eigen::MatrixXd Zdt1Cf::true_front(std::size_t points) {
  if (points < 2) throw std::invalid_argument("zdt1: need at least 2 front points");
  Eigen::MatrixXd f(static_cast<Eigen::Index>(points), 2);
  for (std::size_t i = 0; i < points; ++i) {
    const double f1 = static_cast<double>(i) / static_cast<double>(points - 1);
    f(static_cast<Eigen::Index>(i), 0) = -f1;
    f(static_cast<Eigen::Index>(i), 1) = -(1.0 - std::sqrt(f1));
  }
  return f;
}

std::unique_ptr<SyntheticProblem> synthetic_cf_problem(const std::string& name) {
  if (name == "branin-currin-cf") return std::make_unique<BraninCurrinCf>();
  if (name == "zdt1") return std::make_unique<Zdt1Cf>();
  throw std::invalid_argument("unknown synthetic problem '" + name + "'");
}

}  // namespace cfmesmo

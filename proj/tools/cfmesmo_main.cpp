// cfmesmo command-line driver.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfmesmo/campaign.hpp"
#include "cfmesmo/config.hpp"
#include "cfmesmo/csv.hpp"
#include "cfmesmo/noise.hpp"
#include "cfmesmo/pareto.hpp"
#include "cfmesmo/resna.hpp"
#include "cfmesmo/rng.hpp"

using namespace cfmesmo;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string optimizer;
  std::optional<double> budget;
};

struct DesignArgs {
  int res_cell = 8;
  double freq_hz = 5e8;
  double temperature_k = 350.0;
  int xbar_size = 128;
  std::string x;  // synthetic problems: comma-separated coordinates in [0,1]
};

CampaignConfig effective_config(const Common& c) {
  CampaignConfig cfg = c.config_path.empty() ? CampaignConfig{} : load_config(c.config_path);
  apply_environment(cfg);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (!c.optimizer.empty()) cfg.optimizer = c.optimizer;
  if (c.budget) cfg.optimizer_config.budget.total_cost = *c.budget;
  validate_config(cfg);
  return cfg;
}

void add_common(CLI::App* app, Common& c, bool run_flags) {
  app->add_option("--config", c.config_path, "YAML campaign config (defaults when omitted)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Seed (replaces the configured seed list)");
  if (run_flags) {
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--optimizer", c.optimizer, "cf-mesmo, mesmo, random or nsga2");
    app->add_option("--budget", c.budget, "Total normalized cost budget")->check(CLI::PositiveNumber);
  }
}

void add_design(CLI::App* app, DesignArgs& d) {
  app->add_option("--res-cell", d.res_cell, "Bits per cell");
  app->add_option("--freq", d.freq_hz, "Operating frequency in Hz");
  app->add_option("--temp", d.temperature_k, "Temperature in K");
  app->add_option("--xbar", d.xbar_size, "Crossbar size");
}

ReramDesign design_from(const DesignArgs& a, const CampaignConfig& cfg) {
  ReramDesign d{a.res_cell, a.freq_hz, a.temperature_k, a.xbar_size, cfg.reram.device};
  DesignSpace(cfg.reram.bounds, cfg.reram.device).validate(d);
  return d;
}

std::uint64_t first_seed(const CampaignConfig& cfg) { return cfg.seeds.front(); }

int cmd_run(const Common& common) {
  const CampaignConfig cfg = effective_config(common);
  const CampaignOutcome outcome = run_campaign(cfg, &std::cerr);
  for (const auto& f : outcome.files) std::cout << f << '\n';
  if (!outcome.all_completed()) {
    for (const auto& s : outcome.seeds) {
      if (!s.completed) std::cerr << "error: seed " << s.seed << ": " << s.error << '\n';
    }
    return 1;
  }
  return 0;
}

int cmd_evaluate(const Common& common, const DesignArgs& args, double z) {
  const CampaignConfig cfg = effective_config(common);
  const auto problem = make_problem(cfg);
  Eigen::VectorXd x;
  if (cfg.problem == "reram") {
    const auto& rp = dynamic_cast<const ReramProblem&>(*problem);
    const DesignVector v = rp.space().encode(design_from(args, cfg));
    x = Eigen::Map<const Eigen::VectorXd>(v.coords.data(), kDesignDims);
  } else {
    const auto coords = parse_number_list(args.x);
    if (coords.size() != problem->input_dim()) {
      throw std::invalid_argument("--x needs " + std::to_string(problem->input_dim()) + " coordinates");
    }
    x = Eigen::Map<const Eigen::VectorXd>(coords.data(), static_cast<Eigen::Index>(coords.size()));
  }
  const FidelityVector fz = problem->fidelity(z);
  const Evaluation ev = problem->evaluate(x, fz, first_seed(cfg));
  nlohmann::json j;
  const auto names = problem->objective_names();
  for (std::size_t k = 0; k < names.size(); ++k) j["y"][names[k]] = ev.y[static_cast<Eigen::Index>(k)];
  j["z"] = fz.z;
  j["cost"] = problem->normalized_cost(x, fz);
  j["cost_seconds"] = ev.cost_seconds;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_train_one(const Common& common, const DesignArgs& args, double z) {
  const CampaignConfig cfg = effective_config(common);
  const ReramProblem problem(cfg.reram);
  const ReramDesign d = design_from(args, cfg);
  const AccuracyEvaluation acc = accuracy_objective(d, z, cfg.reram.accuracy, problem.dataset(), first_seed(cfg));
  nlohmann::json j;
  j["accuracy"] = acc.accuracy;
  j["epochs"] = acc.epochs;
  j["cost_seconds"] = acc.cost_seconds;
  j["per_run"] = acc.per_run;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_noise_hist(const Common& common, const DesignArgs& args, std::size_t samples, std::size_t bins,
                   const std::string& out_path) {
  const CampaignConfig cfg = effective_config(common);
  const ReramDesign d = design_from(args, cfg);
  Rng rng = make_stream(first_seed(cfg), {0x6e6f697365ULL});
  const auto rows = noise_histogram(d, cfg.reram.accuracy.mlp.rtn, samples, bins, rng);
  std::ostringstream buf;
  CsvWriter csv(buf);
  csv.comment("config_hash=" + config_hash(cfg) + " seed=" + std::to_string(first_seed(cfg)));
  csv.row({"level", "g_siemens", "source", "bin_lo", "bin_hi", "count"});
  for (const auto& r : rows) {
    csv.row({std::to_string(r.level), format_double(r.g), to_string(r.kind), format_double(r.bin_lo),
             format_double(r.bin_hi), std::to_string(r.count)});
  }
  if (out_path.empty()) {
    std::cout << buf.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << buf.str();
  }
  return 0;
}

int cmd_hv(const std::string& front_path, const std::string& ref_text, std::size_t objectives) {
  std::ifstream in(front_path);
  if (!in) throw std::runtime_error("cannot open " + front_path);
  Eigen::MatrixXd table = read_numeric_csv(in, front_path);
  const auto ref = parse_number_list(ref_text);
  const auto m = static_cast<Eigen::Index>(objectives == 0 ? ref.size() : objectives);
  if (static_cast<std::size_t>(m) != ref.size()) throw std::invalid_argument("--objectives must match the --ref length");
  if (table.rows() > 0 && table.cols() < m) throw std::invalid_argument(front_path + ": fewer columns than objectives");
  const Eigen::MatrixXd pts = table.rows() > 0 ? Eigen::MatrixXd(table.rightCols(m)) : Eigen::MatrixXd(0, m);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(ref.data(), m);
  nlohmann::json j;
  j["hypervolume"] = hypervolume_clipped(pts, r);
  j["points"] = pts.rows();
  j["non_dominated"] = non_dominated_indices(pts).size();
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-fidelity multi-objective Bayesian optimization of ReRAM crossbar designs"};
  app.require_subcommand(1);

  Common run_common, eval_common, train_common, hist_common, emit_common;
  DesignArgs eval_design, train_design, hist_design;
  double eval_z = 1.0, train_z = 1.0;
  std::size_t hist_samples = 20000, hist_bins = 60;
  std::string hist_out, hv_front, hv_ref;
  std::size_t hv_objectives = 0;

  auto* run = app.add_subcommand("run", "Run an optimization campaign over the configured seeds");
  add_common(run, run_common, true);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one design at a fidelity and print y and cost");
  add_common(evaluate, eval_common, false);
  add_design(evaluate, eval_design);
  evaluate->add_option("--x", eval_design.x, "Synthetic problems: comma-separated coordinates in [0,1]");
  evaluate->add_option("--z", eval_z, "Fidelity in [0,1]")->check(CLI::Range(0.0, 1.0));

  auto* train_one = app.add_subcommand("train-one", "Train and deploy the network for one design");
  add_common(train_one, train_common, false);
  add_design(train_one, train_design);
  train_one->add_option("--z", train_z, "Fidelity in [0,1] (epochs = round(10 + 90 z))")->check(CLI::Range(0.0, 1.0));

  auto* hist = app.add_subcommand("noise-hist", "Histogram of sampled relative conductance noise per level (CSV)");
  add_common(hist, hist_common, false);
  add_design(hist, hist_design);
  hist->add_option("--samples", hist_samples, "Samples per level and source")->check(CLI::PositiveNumber);
  hist->add_option("--bins", hist_bins, "Histogram bins")->check(CLI::PositiveNumber);
  hist->add_option("--out", hist_out, "Output CSV (stdout when omitted)");

  auto* hv = app.add_subcommand("hv", "Hypervolume of a front CSV (maximization)");
  hv->add_option("--front", hv_front, "CSV whose last columns hold objective values")->required()->check(CLI::ExistingFile);
  hv->add_option("--ref", hv_ref, "Reference point, comma-separated")->required();
  hv->add_option("--objectives", hv_objectives, "Number of trailing objective columns (default: reference length)");

  auto* emit = app.add_subcommand("emit-defaults", "Print the full default config (or the effective one with --config)");
  emit->add_option("--config", emit_common.config_path, "YAML campaign config")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_common);
    if (*evaluate) return cmd_evaluate(eval_common, eval_design, eval_z);
    if (*train_one) return cmd_train_one(train_common, train_design, train_z);
    if (*hist) return cmd_noise_hist(hist_common, hist_design, hist_samples, hist_bins, hist_out);
    if (*hv) return cmd_hv(hv_front, hv_ref, hv_objectives);
    if (*emit) {
      std::cout << emit_config(effective_config(emit_common));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

#include "cfmesmo/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cfmesmo/csv.hpp"

namespace cfmesmo {

namespace {

std::string header_line(const std::string& hash, const std::string& seed_text) {
  return "config_hash=" + hash + " seed=" + seed_text;
}

std::string fmt(double v) { return format_double(v); }

void write_file(const std::filesystem::path& path, const std::string& content, std::vector<std::string>& files) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
  files.push_back(path.string());
}

// Fidelity of the first fidelity-bearing objective; all CF evaluations share one z.
double representative_fidelity(const MooProblem& problem, const FidelityVector& z) {
  const auto bearing = problem.fidelity_bearing();
  for (std::size_t j = 0; j < bearing.size() && j < z.z.size(); ++j) {
    if (bearing[j]) return z.z[j];
  }
  return z.z.empty() ? 1.0 : z.z.front();
}

}  // namespace

bool CampaignOutcome::all_completed() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.completed; });
}

double hypervolume_at_cost(const std::vector<TraceRow>& trace, double cost) {
  double hv = 0.0;
  for (const auto& row : trace) {
    if (row.cumulative_cost > cost) break;
    hv = row.hypervolume;
  }
  return hv;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || values[hi] == values[lo]) return values[lo];  // also keeps infinite entries exact
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> cost_grid(double max_cost, std::size_t points) {
  if (points < 2 || !(max_cost > 0.0)) throw std::invalid_argument("cost_grid: need >= 2 points and a positive range");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = max_cost * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

std::vector<HvQuantileRow> aggregate_hypervolume(const std::vector<std::vector<TraceRow>>& traces,
                                                 const std::vector<double>& grid) {
  if (traces.empty()) throw std::invalid_argument("aggregate_hypervolume: no traces");
  std::vector<HvQuantileRow> rows;
  rows.reserve(grid.size());
  std::vector<double> hv(traces.size());
  for (double c : grid) {
    for (std::size_t s = 0; s < traces.size(); ++s) hv[s] = hypervolume_at_cost(traces[s], c);
    rows.push_back({c, quantile(hv, 0.25), quantile(hv, 0.5), quantile(hv, 0.75)});
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const MooProblem& problem, const CampaignResult& result,
                     const std::string& hash, std::uint64_t seed, bool record_cpu_time) {
  CsvWriter csv(out);
  csv.comment(header_line(hash, std::to_string(seed)));
  const auto names = problem.input_names();
  const auto objectives = problem.objective_names();
  std::vector<std::string> head{"iteration", "initial"};
  head.insert(head.end(), names.begin(), names.end());
  for (const auto& o : objectives) head.push_back("z_" + o);
  head.insert(head.end(), objectives.begin(), objectives.end());
  for (const char* col : {"status", "alpha", "cost", "cum_cost", "hypervolume"}) head.emplace_back(col);
  if (record_cpu_time) head.emplace_back("cpu_seconds");
  csv.row(head);

  for (const auto& r : result.trace) {
    std::vector<std::string> f{std::to_string(r.iteration), r.initial ? "1" : "0"};
    for (double v : problem.describe(r.x)) f.push_back(fmt(v));
    for (std::size_t j = 0; j < objectives.size(); ++j) f.push_back(j < r.z.z.size() ? fmt(r.z.z[j]) : "nan");
    for (std::size_t j = 0; j < objectives.size(); ++j) {
      f.push_back(r.failed || j >= static_cast<std::size_t>(r.y.size()) ? "nan" : fmt(r.y[static_cast<Eigen::Index>(j)]));
    }
    f.push_back(r.failed ? "failed: " + r.error : "ok");
    f.push_back(fmt(r.alpha));
    f.push_back(fmt(r.cost));
    f.push_back(fmt(r.cumulative_cost));
    f.push_back(fmt(r.hypervolume));
    if (record_cpu_time) f.push_back(fmt(r.cost_seconds));
    csv.row(f);
  }
}

void write_front_csv(std::ostream& out, const MooProblem& problem, const FrontSet& front, const std::string& hash,
                     std::uint64_t seed) {
  CsvWriter csv(out);
  csv.comment(header_line(hash, std::to_string(seed)));
  std::vector<std::string> head = problem.input_names();
  const auto objectives = problem.objective_names();
  head.insert(head.end(), objectives.begin(), objectives.end());
  csv.row(head);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(front.size()); ++i) {
    std::vector<std::string> f;
    for (double v : problem.describe(front.inputs().row(i).transpose())) f.push_back(fmt(v));
    for (Eigen::Index j = 0; j < front.objectives().cols(); ++j) f.push_back(fmt(front.objectives()(i, j)));
    csv.row(f);
  }
}

nlohmann::json campaign_log(const CampaignConfig& config, const MooProblem& problem, const SeedOutcome& outcome) {
  using nlohmann::json;
  const auto& r = outcome.result;
  json j;
  j["config_hash"] = config_hash(config);
  j["config_yaml"] = emit_config(canonical_config(config));
  j["seed"] = outcome.seed;
  j["problem"] = problem.name();
  j["optimizer"] = config.optimizer;
  j["completed"] = outcome.completed;
  if (!outcome.completed) {
    j["error"] = outcome.error;
    return j;
  }
  j["stop_reason"] = r.stop_reason;
  j["truncated"] = r.truncated;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["evaluations"] = r.trace.size();
  j["total_cost"] = r.total_cost;
  j["final_hypervolume"] = r.trace.empty() ? 0.0 : r.trace.back().hypervolume;
  const Eigen::VectorXd ref = problem.reference_point();
  j["reference_point"] = std::vector<double>(ref.data(), ref.data() + ref.size());
  j["hyperparameters"] = r.models;
  json front = json::array();
  const auto names = problem.input_names();
  const auto objectives = problem.objective_names();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(r.front.size()); ++i) {
    json point;
    const auto d = problem.describe(r.front.inputs().row(i).transpose());
    for (std::size_t k = 0; k < names.size(); ++k) point["design"][names[k]] = d[k];
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      point["objectives"][objectives[k]] = r.front.objectives()(i, static_cast<Eigen::Index>(k));
    }
    front.push_back(point);
  }
  j["front"] = front;
  return j;
}

CampaignOutcome run_campaign(const CampaignConfig& config, std::ostream* log) {
  validate_config(config);
  const OptimizerKind kind = parse_optimizer(config.optimizer);
  const std::string hash = config_hash(config);
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);

  CampaignOutcome outcome;
  outcome.seeds.resize(config.seeds.size());
  std::mutex mutex;
  std::vector<std::string> files;
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(mutex);
    *log << msg << '\n' << std::flush;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      SeedOutcome& so = outcome.seeds[i];
      so.seed = config.seeds[i];
      std::vector<std::string> written;
      std::unique_ptr<MooProblem> problem;
      try {
        problem = make_problem(config);
        note("seed " + std::to_string(so.seed) + ": running " + config.optimizer + " on " + problem->name());
        so.result = run_optimizer(*problem, kind, config.optimizer_config, so.seed);
        so.completed = true;
        const std::string tag = "seed" + std::to_string(so.seed);
        std::ostringstream trace, front;
        write_trace_csv(trace, *problem, so.result, hash, so.seed, config.record_cpu_time);
        write_front_csv(front, *problem, so.result.front, hash, so.seed);
        write_file(dir / ("trace_" + tag + ".csv"), trace.str(), written);
        write_file(dir / ("front_" + tag + ".csv"), front.str(), written);
        write_file(dir / ("campaign_" + tag + ".json"), campaign_log(config, *problem, so).dump(2) + "\n", written);
        note("seed " + std::to_string(so.seed) + ": " + so.result.stop_reason + ", " +
             std::to_string(so.result.trace.size()) + " evaluations, cost " + fmt(so.result.total_cost) +
             ", hypervolume " + fmt(so.result.trace.empty() ? 0.0 : so.result.trace.back().hypervolume));
      } catch (const std::exception& e) {
        so.completed = false;
        so.error = e.what();
        note("seed " + std::to_string(so.seed) + " failed: " + so.error);
        if (problem) {
          try {
            write_file(dir / ("campaign_seed" + std::to_string(so.seed) + ".json"),
                       campaign_log(config, *problem, so).dump(2) + "\n", written);
          } catch (const std::exception&) {
          }
        }
      }
      std::lock_guard<std::mutex> lock(mutex);
      files.insert(files.end(), written.begin(), written.end());
    }
  };

  const std::size_t threads = std::min(config.workers, config.seeds.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<std::vector<TraceRow>> traces;
  std::string seed_list;
  for (const auto& so : outcome.seeds) {
    if (!so.completed) continue;
    traces.push_back(so.result.trace);
    seed_list += (seed_list.empty() ? "" : ",") + std::to_string(so.seed);
  }
  if (!traces.empty()) {
    const auto problem = make_problem(config);
    std::ostringstream hv;
    CsvWriter csv(hv);
    csv.comment(header_line(hash, seed_list));
    csv.row({"cost", "hv_q25", "hv_median", "hv_q75"});
    for (const auto& row : aggregate_hypervolume(traces, cost_grid(config.optimizer_config.budget.total_cost, 101))) {
      csv.row({fmt(row.cost), fmt(row.q25), fmt(row.median), fmt(row.q75)});
    }
    write_file(dir / "hv_vs_cost.csv", hv.str(), files);

    std::ostringstream fid;
    CsvWriter fcsv(fid);
    fcsv.comment(header_line(hash, seed_list));
    fcsv.row({"seed", "iteration", "initial", "cum_cost", "fidelity"});
    for (const auto& so : outcome.seeds) {
      if (!so.completed) continue;
      for (const auto& r : so.result.trace) {
        fcsv.row({std::to_string(so.seed), std::to_string(r.iteration), r.initial ? "1" : "0", fmt(r.cumulative_cost),
                  fmt(representative_fidelity(*problem, r.z))});
      }
    }
    write_file(dir / "fidelity_trace.csv", fid.str(), files);
  }
  std::sort(files.begin(), files.end());
  outcome.files = std::move(files);
  return outcome;
}

}  // namespace cfmesmo

#include "cfmesmo/mesmo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cfmesmo/rng.hpp"

namespace cfmesmo {

double entropy_term(double gamma) {
  if (std::isnan(gamma)) throw std::invalid_argument("entropy_term: gamma is NaN");
  if (gamma == std::numeric_limits<double>::infinity()) return 0.0;
  const double log_phi = -0.5 * gamma * gamma - 0.5 * std::log(2.0 * std::numbers::pi);
  double log_cdf = 0.0;
  double ratio = 0.0;  // phi / Phi
  if (gamma < -8.0) {
    // Phi(g) = phi(g) / (-g) * (1 - 1/g^2 + 3/g^4 - 15/g^6 + ...), summed to its smallest term.
    const double inv2 = 1.0 / (gamma * gamma);
    double term = 1.0;
    double series = 1.0;
    for (int k = 1; k < 60; ++k) {
      const double next = -term * (2.0 * k - 1.0) * inv2;
      if (std::abs(next) >= std::abs(term)) break;
      term = next;
      series += term;
    }
    ratio = -gamma / series;
    log_cdf = log_phi - std::log(-gamma) + std::log(series);
  } else {
    const double upper_tail = 0.5 * std::erfc(gamma / std::numbers::sqrt2);  // 1 - Phi
    const double cdf = 0.5 * std::erfc(-gamma / std::numbers::sqrt2);
    log_cdf = gamma >= 0.0 ? std::log1p(-upper_tail) : std::log(cdf);
    ratio = std::exp(log_phi - log_cdf);
  }
  return std::max(0.0, 0.5 * gamma * ratio - log_cdf);
}

ParetoFrontSample ParetoFrontSample::from_front(const FrontSet& front) {
  if (front.empty()) throw std::invalid_argument("front sample: empty front");
  ParetoFrontSample s;
  s.inputs = front.inputs();
  s.values = front.objectives();
  s.maxima = s.values.colwise().maxCoeff().transpose();
  return s;
}

void floor_maxima(std::vector<ParetoFrontSample>& fronts, const Eigen::VectorXd& observed_best) {
  for (auto& f : fronts) {
    if (f.maxima.size() != observed_best.size()) throw std::invalid_argument("floor_maxima: dimension mismatch");
    f.maxima = f.maxima.cwiseMax(observed_best);
  }
}

std::vector<ParetoFrontSample> sample_pareto_fronts(const std::vector<CfGpModel>& models, std::size_t samples,
                                                    std::size_t rff_features, const Nsga2Config& inner,
                                                    std::uint64_t seed) {
  if (models.empty()) throw std::invalid_argument("sample_pareto_fronts: no models");
  if (samples == 0) throw std::invalid_argument("sample_pareto_fronts: need at least one sample");
  const std::size_t d = models.front().input_dim();
  std::vector<ParetoFrontSample> fronts;
  fronts.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng = make_stream(seed, {s});
    std::vector<SampledFunction> fs;
    for (const auto& m : models) fs.push_back(m.sample_function(split_seed(rng), rff_features));
    const BatchObjective objective = [&fs](const Eigen::MatrixXd& xs) {
      Eigen::MatrixXd out(xs.rows(), static_cast<Eigen::Index>(fs.size()));
      for (std::size_t j = 0; j < fs.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = fs[j].evaluate(xs);
      return out;
    };
    fronts.push_back(ParetoFrontSample::from_front(nsga2(objective, Bounds::unit(d), inner, split_seed(rng))));
  }
  return fronts;
}

Eigen::VectorXd acquisition_batch(const std::vector<CfGpModel>& models, const Eigen::MatrixXd& xs,
                                  const FidelityVector& z, const std::vector<ParetoFrontSample>& fronts,
                                  const Eigen::VectorXd& costs, double sigma_floor) {
  if (models.size() != z.z.size()) throw std::invalid_argument("acquisition: one fidelity per model required");
  if (fronts.empty()) throw std::invalid_argument("acquisition: no front samples");
  if (costs.size() != xs.rows() || (costs.array() <= 0.0).any()) {
    throw std::invalid_argument("acquisition: costs must be positive, one per point");
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(xs.rows());
  Eigen::VectorXd mean, std;
  for (std::size_t j = 0; j < models.size(); ++j) {
    models[j].posterior(xs, z.z[j], mean, std);
    std = std.cwiseMax(sigma_floor);
    for (const auto& f : fronts) {
      const double top = f.maxima[static_cast<Eigen::Index>(j)];
      for (Eigen::Index i = 0; i < xs.rows(); ++i) total[i] += entropy_term((top - mean[i]) / std[i]);
    }
  }
  return total.array() / (costs.array() * static_cast<double>(fronts.size()));
}

double acquisition(const std::vector<CfGpModel>& models, const Eigen::VectorXd& x, const FidelityVector& z,
                   const std::vector<ParetoFrontSample>& fronts, double cost, double sigma_floor) {
  return acquisition_batch(models, Eigen::MatrixXd(x.transpose()), z, fronts, Eigen::VectorXd::Constant(1, cost),
                           sigma_floor)[0];
}

std::vector<double> fidelity_grid(std::size_t levels) {
  if (levels == 0) throw std::invalid_argument("fidelity_grid: need at least one level");
  if (levels == 1) return {1.0};
  std::vector<double> grid(levels);
  for (std::size_t l = 0; l < levels; ++l) grid[l] = static_cast<double>(l) / static_cast<double>(levels - 1);
  grid.back() = 1.0;
  return grid;
}

Selection select_from_pool(const std::vector<CfGpModel>& models, const std::vector<ParetoFrontSample>& fronts,
                           const MooProblem& problem, const Eigen::MatrixXd& pool, const std::vector<double>& grid,
                           double sigma_floor) {
  if (pool.rows() == 0 || grid.empty()) throw std::invalid_argument("select: empty pool or fidelity grid");
  Selection best;
  bool have = false;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const FidelityVector z = problem.fidelity(grid[l]);
    Eigen::VectorXd costs(pool.rows());
    for (Eigen::Index i = 0; i < pool.rows(); ++i) costs[i] = problem.normalized_cost(pool.row(i).transpose(), z);
    const Eigen::VectorXd alpha = acquisition_batch(models, pool, z, fronts, costs, sigma_floor);
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
      const auto idx = static_cast<std::size_t>(i);
      bool better = !have || alpha[i] > best.alpha;
      if (have && alpha[i] == best.alpha) {
        better = costs[i] < best.cost ||
                 (costs[i] == best.cost && (idx < best.pool_index || (idx == best.pool_index && l < best.level)));
      }
      if (better) {
        best.x = pool.row(i).transpose();
        best.z = z;
        best.alpha = alpha[i];
        best.cost = costs[i];
        best.pool_index = idx;
        best.level = l;
        have = true;
      }
    }
  }
  return best;
}

Eigen::MatrixXd candidate_pool(const MooProblem& problem, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw std::invalid_argument("candidate pool must be non-empty");
  Rng rng = make_stream(seed, {0x706f6f6cu});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(problem.input_dim());
  Eigen::MatrixXd pool(static_cast<Eigen::Index>(size), d);
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    Eigen::VectorXd x(d);
    for (Eigen::Index k = 0; k < d; ++k) x[k] = unit(rng);
    pool.row(i) = problem.canonicalize(x).transpose();
  }
  return pool;
}

Selection select_next(const std::vector<CfGpModel>& models, const std::vector<ParetoFrontSample>& fronts,
                      const MooProblem& problem, const AcquisitionConfig& config, std::uint64_t seed,
                      bool highest_fidelity_only) {
  const Eigen::MatrixXd pool = candidate_pool(problem, config.pool_size, seed);
  const std::vector<double> grid = highest_fidelity_only ? std::vector<double>{1.0} : fidelity_grid(config.fidelity_levels);
  return select_from_pool(models, fronts, problem, pool, grid, config.sigma_floor);
}

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::cf_mesmo: return "cf-mesmo";
    case OptimizerKind::mesmo: return "mesmo";
    case OptimizerKind::random: return "random";
    case OptimizerKind::nsga2: return "nsga2";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
  for (auto k : {OptimizerKind::cf_mesmo, OptimizerKind::mesmo, OptimizerKind::random, OptimizerKind::nsga2}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected cf-mesmo, mesmo, random or nsga2)");
}

double cost_to_reach(const std::vector<TraceRow>& trace, double target) {
  for (const auto& row : trace) {
    if (row.hypervolume >= target) return row.cumulative_cost;
  }
  return std::numeric_limits<double>::infinity();
}

namespace {

bool reportable(const TraceRow& r, bool highest_only) { return !r.failed && (!highest_only || r.z.is_highest()); }

Eigen::MatrixXd reportable_values(const std::vector<TraceRow>& rows, bool highest_only, std::vector<std::size_t>* which) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (reportable(rows[i], highest_only)) idx.push_back(i);
  }
  Eigen::MatrixXd y(static_cast<Eigen::Index>(idx.size()), idx.empty() ? 0 : rows[idx.front()].y.size());
  for (std::size_t k = 0; k < idx.size(); ++k) y.row(static_cast<Eigen::Index>(k)) = rows[idx[k]].y.transpose();
  if (which) *which = std::move(idx);
  return y;
}

class Runner {
 public:
  Runner(const MooProblem& problem, OptimizerKind kind, const OptimizerConfig& config, std::uint64_t seed)
      : p_(problem), kind_(kind), cfg_(config), seed_(seed) {
    if (!(config.budget.total_cost > 0.0)) throw std::invalid_argument("budget: total cost must be positive");
    if (config.budget.convergence_window == 0) throw std::invalid_argument("budget: convergence window must be >= 1");
    ref_ = problem.reference_point();
  }

  CampaignResult run() {
    CampaignResult result;
    if (kind_ == OptimizerKind::nsga2) {
      run_nsga2_loop(result);
    } else {
      run_model_loop(result);
    }
    finish(result);
    return result;
  }

 private:
  Eigen::VectorXd random_point(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(p_.input_dim()));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = unit(rng);
    return p_.canonicalize(x);
  }

  void record(const Eigen::VectorXd& x, const FidelityVector& z, double alpha, bool initial) {
    TraceRow row;
    row.iteration = initial ? 0 : state_.iteration;
    row.initial = initial;
    row.x = x;
    row.z = z;
    row.alpha = alpha;
    row.cost = p_.normalized_cost(x, z);
    const std::uint64_t eval_seed = make_stream(seed_, {0x6576u, state_.history.size()})();
    try {
      Evaluation ev = p_.evaluate(x, z, eval_seed);
      if (!ev.y.allFinite()) throw std::runtime_error("objective returned a non-finite value");
      row.y = std::move(ev.y);
      row.cost_seconds = ev.cost_seconds;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    state_.cumulative_cost += row.cost;
    row.cumulative_cost = state_.cumulative_cost;
    state_.history.push_back(row);
    state_.history.back().hypervolume = current_hv();
    if (!initial && !row.failed && z.is_highest()) state_.hv_window.push_back(state_.history.back().hypervolume);
  }

  double current_hv() const {
    const Eigen::MatrixXd y = reportable_values(state_.history, cfg_.highest_fidelity_front, nullptr);
    return y.rows() == 0 ? 0.0 : hypervolume_clipped(y, ref_);
  }

  Eigen::VectorXd observed_best() const {
    Eigen::VectorXd best = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p_.num_objectives()),
                                                     -std::numeric_limits<double>::infinity());
    for (const auto& row : state_.history) {
      if (!row.failed) best = best.cwiseMax(row.y);
    }
    return best;
  }

  bool converged() const {
    const auto& w = state_.hv_window;
    const std::size_t win = cfg_.budget.convergence_window;
    if (w.size() <= win) return false;
    const double before = w[w.size() - 1 - win];
    const double now = w.back();
    if (!(before > 0.0)) return false;
    return std::abs(now - before) / before < cfg_.budget.convergence_epsilon;
  }

  bool refit(std::uint64_t fit_seed) {
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < state_.history.size(); ++i) {
      if (!state_.history[i].failed) ok.push_back(i);
    }
    if (ok.size() < 2) return false;
    const auto n = static_cast<Eigen::Index>(ok.size());
    const auto d = static_cast<Eigen::Index>(p_.input_dim());
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = state_.history[ok[static_cast<std::size_t>(i)]].x.transpose();
    std::vector<CfGpModel> models;
    for (std::size_t j = 0; j < p_.num_objectives(); ++j) {
      Eigen::VectorXd z(n), y(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = state_.history[ok[static_cast<std::size_t>(i)]];
        z[i] = row.z.z[j];
        y[i] = row.y[static_cast<Eigen::Index>(j)];
      }
      GpFitOptions opts = cfg_.gp;
      opts.seed = make_stream(fit_seed, {j})();
      if (state_.models.size() == p_.num_objectives()) opts.warm_start = state_.models[j].hyperparameters();
      models.push_back(CfGpModel::fit(x, z, y, opts));
    }
    state_.models = std::move(models);
    return true;
  }

  void run_model_loop(CampaignResult& result) {
    const bool bo = kind_ == OptimizerKind::cf_mesmo || kind_ == OptimizerKind::mesmo;
    const FidelityVector top = FidelityVector::highest(p_.num_objectives());
    Rng init_rng = make_stream(seed_, {0x696e6974u});
    for (std::size_t i = 0; i < cfg_.budget.initial_points; ++i) record(random_point(init_rng), top, 0.0, true);
    if (state_.cumulative_cost > cfg_.budget.total_cost) {
      result.truncated = true;
      result.stop_reason = "budget exhausted by initialization";
      return;
    }
    Rng random_rng = make_stream(seed_, {0x72616e64u});
    bool have_models = bo && refit(make_stream(seed_, {0x666974u, 0})());
    while (true) {
      if (state_.cumulative_cost > cfg_.budget.total_cost) {
        result.stop_reason = "budget";
        break;
      }
      if (state_.iteration >= cfg_.budget.max_iterations) {
        result.stop_reason = "max iterations";
        break;
      }
      if (bo && converged()) {
        result.converged = true;
        result.stop_reason = "converged";
        break;
      }
      ++state_.iteration;
      if (bo && have_models) {
        const std::uint64_t it_seed = make_stream(seed_, {0x616371u, state_.iteration})();
        auto fronts = sample_pareto_fronts(state_.models, cfg_.acquisition.front_samples,
                                           cfg_.acquisition.rff_features, cfg_.acquisition.inner, it_seed);
        if (cfg_.acquisition.floor_at_observed) floor_maxima(fronts, observed_best());
        const Selection sel =
            select_next(state_.models, fronts, p_, cfg_.acquisition, it_seed, kind_ == OptimizerKind::mesmo);
        record(sel.x, sel.z, sel.alpha, false);
      } else {
        record(random_point(random_rng), top, 0.0, false);
      }
      if (bo) have_models = refit(make_stream(seed_, {0x666974u, state_.iteration})()) || have_models;
    }
  }

  void run_nsga2_loop(CampaignResult& result) {
    const FidelityVector top = FidelityVector::highest(p_.num_objectives());
    Nsga2 opt(Bounds::unit(p_.input_dim()), cfg_.baseline_nsga2, make_stream(seed_, {0x6e736761u})());
    const Eigen::VectorXd penalty = ref_.array() - ref_.array().abs() - 1.0;
    while (true) {
      const Eigen::MatrixXd batch = opt.ask();
      Eigen::MatrixXd values(batch.rows(), static_cast<Eigen::Index>(p_.num_objectives()));
      for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        if (state_.cumulative_cost > cfg_.budget.total_cost) {
          result.stop_reason = "budget";
          return;
        }
        if (state_.iteration >= cfg_.budget.max_iterations) {
          result.stop_reason = "max iterations";
          return;
        }
        ++state_.iteration;
        record(p_.canonicalize(batch.row(i).transpose()), top, 0.0, false);
        const auto& row = state_.history.back();
        values.row(i) = row.failed ? penalty.transpose() : row.y.transpose();
      }
      opt.tell(values);
    }
  }

  void finish(CampaignResult& result) {
    std::vector<std::size_t> idx;
    const Eigen::MatrixXd y = reportable_values(state_.history, cfg_.highest_fidelity_front, &idx);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(p_.input_dim()));
    for (std::size_t k = 0; k < idx.size(); ++k) x.row(static_cast<Eigen::Index>(k)) = state_.history[idx[k]].x.transpose();
    if (y.rows() > 0) result.front = FrontSet::filter(x, y);
    result.trace = state_.history;
    result.iterations = state_.iteration;
    result.total_cost = state_.cumulative_cost;
    for (const auto& m : state_.models) result.models.push_back(m.hyperparameters_json());
  }

  const MooProblem& p_;
  OptimizerKind kind_;
  OptimizerConfig cfg_;
  std::uint64_t seed_;
  Eigen::VectorXd ref_;
  CampaignState state_;
};

}  // namespace

CampaignResult run_optimizer(const MooProblem& problem, OptimizerKind kind, const OptimizerConfig& config,
                             std::uint64_t seed) {
  return Runner(problem, kind, config, seed).run();
}
CampaignResult run_cf_mesmo(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed) {
  return run_optimizer(problem, OptimizerKind::cf_mesmo, config, seed);
}
CampaignResult run_mesmo(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed) {
  return run_optimizer(problem, OptimizerKind::mesmo, config, seed);
}
CampaignResult run_random(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed) {
  return run_optimizer(problem, OptimizerKind::random, config, seed);
}
CampaignResult run_nsga2_baseline(const MooProblem& problem, const OptimizerConfig& config, std::uint64_t seed) {
  return run_optimizer(problem, OptimizerKind::nsga2, config, seed);
}

}  // namespace cfmesmo

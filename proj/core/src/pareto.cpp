#include "cfmesmo/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cfmesmo {

bool dominates(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dominates: dimension mismatch");
  bool strictly = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strictly = true;
  }
  return strictly;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(const Eigen::MatrixXd& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(points.cols());
  std::vector<std::vector<std::size_t>> dominated_by_me(n);
  std::vector<std::size_t> domination_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  if (n == 0) return fronts;

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = points;
  for (std::size_t p = 0; p < n; ++p) {
    const double* a = rows.data() + p * k;
    for (std::size_t q = p + 1; q < n; ++q) {
      const double* b = rows.data() + q * k;
      bool a_better = false, b_better = false;
      for (std::size_t i = 0; i < k; ++i) {
        a_better |= a[i] > b[i];
        b_better |= b[i] > a[i];
      }
      if (a_better && !b_better) {
        dominated_by_me[p].push_back(q);
        ++domination_count[q];
      } else if (b_better && !a_better) {
        dominated_by_me[q].push_back(p);
        ++domination_count[p];
      }
    }
  }
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    if (domination_count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto p : current) {
      for (auto q : dominated_by_me[p]) {
        if (--domination_count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<std::size_t> non_dominated_indices(const Eigen::MatrixXd& points) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    bool dominated = false;
    for (Eigen::Index j = 0; j < points.rows() && !dominated; ++j) {
      if (j != i && dominates(points.row(j).transpose(), points.row(i).transpose())) dominated = true;
    }
    if (!dominated) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<double> crowding_distance(const Eigen::MatrixXd& points, const std::vector<std::size_t>& members) {
  const std::size_t m = members.size();
  std::vector<double> dist(m, 0.0);
  if (m <= 2) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    return dist;
  }
  std::vector<std::size_t> order(m);
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return points(static_cast<Eigen::Index>(members[a]), k) < points(static_cast<Eigen::Index>(members[b]), k);
    });
    const double lo = points(static_cast<Eigen::Index>(members[order.front()]), k);
    const double hi = points(static_cast<Eigen::Index>(members[order.back()]), k);
    dist[order.front()] = std::numeric_limits<double>::infinity();
    dist[order.back()] = std::numeric_limits<double>::infinity();
    if (hi <= lo) continue;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const double prev = points(static_cast<Eigen::Index>(members[order[i - 1]]), k);
      const double next = points(static_cast<Eigen::Index>(members[order[i + 1]]), k);
      dist[order[i]] += (next - prev) / (hi - lo);
    }
  }
  return dist;
}

FrontSet::FrontSet(Eigen::MatrixXd inputs, Eigen::MatrixXd objectives)
    : inputs_(std::move(inputs)), objectives_(std::move(objectives)) {
  if (inputs_.rows() != objectives_.rows()) throw std::invalid_argument("FrontSet: row count mismatch");
  for (Eigen::Index i = 0; i < objectives_.rows(); ++i) {
    if (!objectives_.row(i).allFinite()) throw std::invalid_argument("FrontSet: non-finite objective");
    for (Eigen::Index j = 0; j < objectives_.rows(); ++j) {
      if (i != j && dominates(objectives_.row(i).transpose(), objectives_.row(j).transpose())) {
        throw std::invalid_argument("FrontSet: member dominates another member");
      }
    }
  }
}

FrontSet FrontSet::filter(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& objectives) {
  auto keep = non_dominated_indices(objectives);
  std::vector<std::size_t> unique;
  for (auto i : keep) {
    const bool seen = std::any_of(unique.begin(), unique.end(), [&](std::size_t u) {
      return objectives.row(static_cast<Eigen::Index>(u)) == objectives.row(static_cast<Eigen::Index>(i));
    });
    if (!seen) unique.push_back(i);
  }
  std::vector<Eigen::Index> idx(unique.begin(), unique.end());
  return FrontSet(inputs(idx, Eigen::all), objectives(idx, Eigen::all));
}

Bounds Bounds::unit(std::size_t dim) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))};
}

Nsga2::Nsga2(Bounds bounds, Nsga2Config config, std::uint64_t seed)
    : bounds_(std::move(bounds)), config_(config), rng_(seed) {
  if (bounds_.dim() == 0 || bounds_.upper.size() != bounds_.lower.size()) {
    throw std::invalid_argument("nsga2: invalid bounds");
  }
  if (config_.population == 0) throw std::invalid_argument("nsga2: population must be >= 1");
}

Eigen::MatrixXd Nsga2::ask() {
  if (!initialized_) {
    const auto n = static_cast<Eigen::Index>(config_.population);
    const auto d = static_cast<Eigen::Index>(bounds_.dim());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    pending_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) pending_(i, k) = bounds_.lower[k] + u(rng_) * (bounds_.upper[k] - bounds_.lower[k]);
    }
  } else {
    pending_ = make_offspring();
  }
  return pending_;
}

void Nsga2::tell(const Eigen::MatrixXd& objectives) {
  if (objectives.rows() != pending_.rows()) throw std::invalid_argument("nsga2: objective batch size mismatch");
  if (!initialized_) {
    initialized_ = true;
    select(pending_, objectives);
    return;
  }
  Eigen::MatrixXd xs(pop_x_.rows() + pending_.rows(), pop_x_.cols());
  xs << pop_x_, pending_;
  Eigen::MatrixXd fs(pop_f_.rows() + objectives.rows(), objectives.cols());
  fs << pop_f_, objectives;
  select(xs, fs);
  ++generation_;
}

void Nsga2::select(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& fs) {
  const std::size_t n = std::min<std::size_t>(config_.population, static_cast<std::size_t>(xs.rows()));
  auto fronts = non_dominated_sort(fs);
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> ranks;
  std::vector<double> crowd;
  for (std::size_t r = 0; r < fronts.size() && chosen.size() < n; ++r) {
    const auto& front = fronts[r];
    auto dist = crowding_distance(fs, front);
    if (chosen.size() + front.size() <= n) {
      for (std::size_t i = 0; i < front.size(); ++i) {
        chosen.push_back(front[i]);
        ranks.push_back(r);
        crowd.push_back(dist[i]);
      }
      continue;
    }
    std::vector<std::size_t> order(front.size());
    std::iota(order.begin(), order.end(), 0);
    // Larger crowding distance first; ties by index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
    for (std::size_t i = 0; chosen.size() < n; ++i) {
      chosen.push_back(front[order[i]]);
      ranks.push_back(r);
      crowd.push_back(dist[order[i]]);
    }
  }
  std::vector<Eigen::Index> idx(chosen.begin(), chosen.end());
  pop_x_ = xs(idx, Eigen::all);
  pop_f_ = fs(idx, Eigen::all);
  rank_ = std::move(ranks);
  crowd_ = std::move(crowd);
}

std::size_t Nsga2::tournament() {
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(pop_x_.rows()) - 1);
  const std::size_t a = pick(rng_);
  const std::size_t b = pick(rng_);
  if (rank_[a] != rank_[b]) return rank_[a] < rank_[b] ? a : b;
  if (crowd_[a] != crowd_[b]) return crowd_[a] > crowd_[b] ? a : b;
  return std::min(a, b);
}

Eigen::MatrixXd Nsga2::make_offspring() {
  const auto n = static_cast<Eigen::Index>(config_.population);
  const auto d = static_cast<Eigen::Index>(bounds_.dim());
  const double pm = config_.mutation_prob < 0.0 ? 1.0 / static_cast<double>(d) : config_.mutation_prob;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd children(n, d);

  for (Eigen::Index c = 0; c < n; c += 2) {
    Eigen::VectorXd p1 = pop_x_.row(static_cast<Eigen::Index>(tournament())).transpose();
    Eigen::VectorXd p2 = pop_x_.row(static_cast<Eigen::Index>(tournament())).transpose();
    Eigen::VectorXd c1 = p1, c2 = p2;

    // Simulated binary crossover, bounded form.
    if (u(rng_) <= config_.crossover_prob) {
      const double eta = config_.crossover_eta;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (u(rng_) > 0.5 || std::abs(p1[k] - p2[k]) <= 1e-14) continue;
        const double y1 = std::min(p1[k], p2[k]);
        const double y2 = std::max(p1[k], p2[k]);
        const double lo = bounds_.lower[k], hi = bounds_.upper[k];
        const double r = u(rng_);

        double beta = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        double betaq = r <= 1.0 / alpha ? std::pow(r * alpha, 1.0 / (eta + 1.0))
                                        : std::pow(1.0 / (2.0 - r * alpha), 1.0 / (eta + 1.0));
        double v1 = 0.5 * ((y1 + y2) - betaq * (y2 - y1));

        beta = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        betaq = r <= 1.0 / alpha ? std::pow(r * alpha, 1.0 / (eta + 1.0))
                                 : std::pow(1.0 / (2.0 - r * alpha), 1.0 / (eta + 1.0));
        double v2 = 0.5 * ((y1 + y2) + betaq * (y2 - y1));

        v1 = std::clamp(v1, lo, hi);
        v2 = std::clamp(v2, lo, hi);
        if (u(rng_) <= 0.5) std::swap(v1, v2);
        c1[k] = v1;
        c2[k] = v2;
      }
    }

    // Polynomial mutation, bounded form.
    for (Eigen::VectorXd* child : {&c1, &c2}) {
      for (Eigen::Index k = 0; k < d; ++k) {
        if (u(rng_) > pm) continue;
        const double lo = bounds_.lower[k], hi = bounds_.upper[k];
        if (hi <= lo) continue;
        const double y = (*child)[k];
        const double d1 = (y - lo) / (hi - lo);
        const double d2 = (hi - y) / (hi - lo);
        const double r = u(rng_);
        const double mpow = 1.0 / (config_.mutation_eta + 1.0);
        double dq;
        if (r < 0.5) {
          const double val = 2.0 * r + (1.0 - 2.0 * r) * std::pow(1.0 - d1, config_.mutation_eta + 1.0);
          dq = std::pow(val, mpow) - 1.0;
        } else {
          const double val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(1.0 - d2, config_.mutation_eta + 1.0);
          dq = 1.0 - std::pow(val, mpow);
        }
        (*child)[k] = std::clamp(y + dq * (hi - lo), lo, hi);
      }
    }
    children.row(c) = c1.transpose();
    if (c + 1 < n) children.row(c + 1) = c2.transpose();
  }
  return children;
}

FrontSet Nsga2::front() const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < rank_.size(); ++i) {
    if (rank_[i] == 0) idx.push_back(static_cast<Eigen::Index>(i));
  }
  return FrontSet::filter(pop_x_(idx, Eigen::all), pop_f_(idx, Eigen::all));
}

FrontSet nsga2(const BatchObjective& objective, const Bounds& bounds, const Nsga2Config& config, std::uint64_t seed) {
  Nsga2 solver(bounds, config, seed);
  solver.tell(objective(solver.ask()));
  for (std::size_t g = 0; g < config.generations; ++g) solver.tell(objective(solver.ask()));
  return solver.front();
}

namespace {

// Points are box corners q >= 0 (offsets from the reference point); the
// dominated region is the union of boxes [0, q].
double hv_recursive(std::vector<Eigen::VectorXd> pts, Eigen::Index dims) {
  if (pts.empty()) return 0.0;
  if (dims == 1) {
    double best = 0.0;
    for (const auto& p : pts) best = std::max(best, p[0]);
    return best;
  }
  const Eigen::Index last = dims - 1;
  std::sort(pts.begin(), pts.end(), [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[last] > b[last]; });
  if (dims == 2) {
    double vol = 0.0, best_x = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      best_x = std::max(best_x, pts[i][0]);
      const double next = i + 1 < pts.size() ? pts[i + 1][1] : 0.0;
      vol += best_x * (pts[i][1] - next);
    }
    return vol;
  }
  double vol = 0.0;
  std::vector<Eigen::VectorXd> slice;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Eigen::VectorXd proj = pts[i].head(last);
    // Drop projected points that are weakly dominated within the slice.
    bool covered = false;
    for (const auto& s : slice) {
      if ((s.array() >= proj.array()).all()) {
        covered = true;
        break;
      }
    }
    if (!covered) {
      std::erase_if(slice, [&](const Eigen::VectorXd& s) { return (proj.array() >= s.array()).all(); });
      slice.push_back(std::move(proj));
    }
    const double next = i + 1 < pts.size() ? pts[i + 1][last] : 0.0;
    const double height = pts[i][last] - next;
    if (height > 0.0) vol += height * hv_recursive(slice, last);
  }
  return vol;
}

}  // namespace

double hypervolume(const Eigen::MatrixXd& front, const Eigen::VectorXd& ref) {
  if (front.rows() == 0) return 0.0;
  if (front.cols() != ref.size()) throw std::invalid_argument("hypervolume: dimension mismatch");
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(front.rows()));
  for (Eigen::Index i = 0; i < front.rows(); ++i) {
    if (!dominates(front.row(i).transpose(), ref)) {
      throw std::invalid_argument("hypervolume: reference point is not dominated by every front member");
    }
    pts.push_back(front.row(i).transpose() - ref);
  }
  return hv_recursive(std::move(pts), ref.size());
}

double hypervolume_clipped(const Eigen::MatrixXd& points, const Eigen::VectorXd& ref) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if ((points.row(i).transpose().array() > ref.array()).all()) keep.push_back(i);
  }
  if (keep.empty()) return 0.0;
  return hypervolume(points(keep, Eigen::all), ref);
}

}  // namespace cfmesmo

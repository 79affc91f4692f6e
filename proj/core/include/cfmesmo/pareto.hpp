#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace cfmesmo {

/// Strict Pareto dominance under maximization. Throws std::invalid_argument on
/// a dimension mismatch.
bool dominates(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// Fast non-dominated sorting of the rows of `points`; element 0 is rank 0.
std::vector<std::vector<std::size_t>> non_dominated_sort(const Eigen::MatrixXd& points);

/// Indices of the rows not dominated by any other row (duplicates are all kept).
std::vector<std::size_t> non_dominated_indices(const Eigen::MatrixXd& points);

/// Crowding distance of each member of `members` within that subset.
std::vector<double> crowding_distance(const Eigen::MatrixXd& points, const std::vector<std::size_t>& members);

/// A mutually non-dominated set of objective vectors and the inputs that produced them.
class FrontSet {
 public:
  FrontSet() = default;
  /// Throws std::invalid_argument if any member dominates another.
  FrontSet(Eigen::MatrixXd inputs, Eigen::MatrixXd objectives);
  /// Keeps only the non-dominated rows (first occurrence of exact duplicates).
  static FrontSet filter(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& objectives);

  std::size_t size() const { return static_cast<std::size_t>(objectives_.rows()); }
  bool empty() const { return size() == 0; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::MatrixXd& objectives() const { return objectives_; }

 private:
  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd objectives_;
};

/// Evaluates a batch of points (one per row) and returns one objective row per point.
using BatchObjective = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

struct Nsga2Config {
  std::size_t population = 100;
  std::size_t generations = 100;
  double crossover_prob = 0.9;
  double crossover_eta = 15.0;
  double mutation_eta = 20.0;
  double mutation_prob = -1.0;  // negative selects 1/dim

  bool operator==(const Nsga2Config&) const = default;
};

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  static Bounds unit(std::size_t dim);
  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
};

/// Ask/tell NSGA-II. ask() returns the initial population first, then one
/// offspring batch per generation; tell() takes their objective values.
class Nsga2 {
 public:
  Nsga2(Bounds bounds, Nsga2Config config, std::uint64_t seed);

  Eigen::MatrixXd ask();
  void tell(const Eigen::MatrixXd& objectives);

  std::size_t generation() const { return generation_; }
  const Eigen::MatrixXd& population() const { return pop_x_; }
  const Eigen::MatrixXd& population_objectives() const { return pop_f_; }
  /// Rank-0 members of the current population.
  FrontSet front() const;

 private:
  Eigen::MatrixXd make_offspring();
  std::size_t tournament();
  void select(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& fs);

  Bounds bounds_;
  Nsga2Config config_;
  std::mt19937_64 rng_;
  Eigen::MatrixXd pop_x_, pop_f_;
  Eigen::MatrixXd pending_;
  std::vector<std::size_t> rank_;
  std::vector<double> crowd_;
  std::size_t generation_ = 0;
  bool initialized_ = false;
};

FrontSet nsga2(const BatchObjective& objective, const Bounds& bounds, const Nsga2Config& config, std::uint64_t seed);

/// Exact dominated hypervolume of a maximization front w.r.t. `ref` by
/// recursive slicing along the last objective. Throws std::invalid_argument
/// unless every row dominates `ref`.
double hypervolume(const Eigen::MatrixXd& front, const Eigen::VectorXd& ref);

/// Hypervolume of the rows that dominate `ref`; other rows contribute nothing.
double hypervolume_clipped(const Eigen::MatrixXd& points, const Eigen::VectorXd& ref);

}  // namespace cfmesmo

#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace cfmesmo {

/// Hyperparameters of the product kernel
///   k((x,z),(x',z')) = signal_variance * exp(-|x-x'|^2_ARD / 2) * exp(-(z-z')^2 / (2 l_z^2)).
/// `lengthscales` holds the design lengthscales followed by the fidelity lengthscale.
/// Values live on the standardized output scale.
struct GpHyperparameters {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double noise_variance = 1e-3;
};

struct GpFitOptions {
  std::size_t restarts = 5;
  double lengthscale_min = 0.05;
  double lengthscale_max = 2.0;
  double fidelity_lengthscale_min = 0.05;
  double fidelity_lengthscale_max = 2.0;
  double noise_min = 1e-6;  // fraction of var(y)
  double noise_max = 1e-1;
  double signal_min = 1e-4;
  double signal_max = 1e2;
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
  std::optional<GpHyperparameters> warm_start;

  bool operator==(const GpFitOptions& o) const {
    return restarts == o.restarts && lengthscale_min == o.lengthscale_min && lengthscale_max == o.lengthscale_max &&
           fidelity_lengthscale_min == o.fidelity_lengthscale_min &&
           fidelity_lengthscale_max == o.fidelity_lengthscale_max &&
           noise_min == o.noise_min && noise_max == o.noise_max && signal_min == o.signal_min &&
           signal_max == o.signal_max && max_iterations == o.max_iterations;
  }
};

struct Posterior {
  double mean = 0.0;
  double std = 0.0;
};

class CfGpModel;

/// One random-Fourier-feature draw from a fitted model's posterior, evaluable
/// at any design point; evaluation defaults to the highest fidelity.
class SampledFunction {
 public:
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double at(const Eigen::Ref<const Eigen::VectorXd>& x, double z) const;
  /// One value per row of `xs`, at the highest fidelity.
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& xs) const;
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& xs, double z) const;

 private:
  friend class CfGpModel;
  Eigen::MatrixXd omega_;       // features x (d+1), already divided by lengthscales
  Eigen::VectorXd phase_;
  Eigen::VectorXd weights_;     // includes the feature amplitude sqrt(2 sf2 / M)
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

/// Continuous-fidelity GP regression over (x in [0,1]^d, z in [0,1]).
class CfGpModel {
 public:
  /// Maximizes the log marginal likelihood by multi-start L-BFGS over
  /// log-hyperparameters within the option bounds. Requires >= 2 points.
  static CfGpModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                       const GpFitOptions& options = {});
  static CfGpModel with_hyperparameters(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                        const GpHyperparameters& hp);

  Posterior posterior(const Eigen::Ref<const Eigen::VectorXd>& x, double z) const;
  /// Posterior moments for each row of `xs` at fidelity z (vectorized).
  void posterior(const Eigen::MatrixXd& xs, double z, Eigen::VectorXd& mean, Eigen::VectorXd& std) const;
  /// Posterior covariance of the latent function between two inputs, output scale.
  double posterior_covariance(const Eigen::Ref<const Eigen::VectorXd>& x1, double z1,
                              const Eigen::Ref<const Eigen::VectorXd>& x2, double z2) const;

  SampledFunction sample_function(std::uint64_t seed, std::size_t n_features = 500) const;

  /// Log marginal likelihood of the standardized outputs.
  double log_marginal_likelihood() const { return lml_; }
  const GpHyperparameters& hyperparameters() const { return hp_; }
  double output_mean() const { return y_mean_; }
  double output_scale() const { return y_scale_; }
  /// Diagonal jitter added beyond the noise variance to obtain a factorization.
  double jitter() const { return jitter_; }
  /// Prior standard deviation of the latent function, output scale.
  double prior_std() const;
  std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs_.cols()) - 1; }
  const Eigen::VectorXd& standardized_outputs() const { return y_std_; }

  nlohmann::json hyperparameters_json() const;

 private:
  void factorize();

  Eigen::MatrixXd inputs_;  // n x (d+1): design coordinates then fidelity
  Eigen::VectorXd y_std_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  GpHyperparameters hp_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

/// Squared-exponential ARD kernel matrix between rows of a and b (inputs include the fidelity column).
Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const GpHyperparameters& hp);

}  // namespace cfmesmo

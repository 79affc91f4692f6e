#include "cfmesmo/gp.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <ceres/ceres.h>
#include <glog/logging.h>
#include <nlohmann/json.hpp>

#include "cfmesmo/rng.hpp"

namespace cfmesmo {

Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const GpHyperparameters& hp) {
  const Eigen::ArrayXd inv_l = hp.lengthscales.array().inverse();
  const Eigen::MatrixXd as = a.array().rowwise() * inv_l.transpose();
  const Eigen::MatrixXd bs = b.array().rowwise() * inv_l.transpose();
  const Eigen::VectorXd an = as.rowwise().squaredNorm();
  const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * as * bs.transpose()).colwise() + an;
  d2.rowwise() += bn.transpose();
  return hp.signal_variance * (-0.5 * d2.array().max(0.0)).exp().matrix();
}

namespace {

constexpr double kMaxJitter = 1e-2;

// Cholesky of K + noise*I with escalating diagonal jitter.
bool factor_with_jitter(const Eigen::MatrixXd& k_signal, double noise, Eigen::LLT<Eigen::MatrixXd>& llt,
                        double& jitter) {
  const auto n = k_signal.rows();
  jitter = 0.0;
  for (double extra = 0.0;;) {
    Eigen::MatrixXd k = k_signal;
    k.diagonal().array() += noise + extra;
    llt.compute(k);
    if (llt.info() == Eigen::Success) {
      jitter = extra;
      return true;
    }
    extra = extra == 0.0 ? 1e-10 * std::max(1.0, k_signal.diagonal().maxCoeff()) : extra * 10.0;
    if (extra > kMaxJitter || n == 0) return false;
  }
}

struct LmlTerms {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;  // w.r.t. log(signal), log(lengthscales...), log(noise)
};

LmlTerms lml_with_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyperparameters& hp,
                           bool want_grad) {
  LmlTerms out;
  const auto n = x.rows();
  const Eigen::MatrixXd kf = se_kernel(x, x, hp);
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  if (!factor_with_jitter(kf, hp.noise_variance, llt, jitter)) return out;
  const Eigen::VectorXd alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.value = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!want_grad) return out;

  const auto p = hp.lengthscales.size();
  out.grad.resize(p + 2);
  const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
  out.grad[0] = 0.5 * (w.array() * kf.array()).sum();
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::VectorXd col = x.col(i) / hp.lengthscales[i];
    const Eigen::MatrixXd rep = col.replicate(1, n);
    const Eigen::MatrixXd d2 = (rep - rep.transpose()).array().square();
    out.grad[1 + i] = 0.5 * (w.array() * kf.array() * d2.array()).sum();
  }
  out.grad[p + 1] = 0.5 * w.trace() * hp.noise_variance;
  return out;
}

struct LogBox {
  Eigen::VectorXd lo, hi;  // log bounds per parameter (signal, lengthscales..., noise)
};

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

GpHyperparameters decode(const double* u, const LogBox& box, Eigen::Index p) {
  GpHyperparameters hp;
  auto val = [&](Eigen::Index i) { return std::exp(box.lo[i] + (box.hi[i] - box.lo[i]) * sigmoid(u[i])); };
  hp.signal_variance = val(0);
  hp.lengthscales.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) hp.lengthscales[i] = val(1 + i);
  hp.noise_variance = val(p + 1);
  return hp;
}

class NegLml final : public ceres::FirstOrderFunction {
 public:
  NegLml(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, LogBox box)
      : x_(x), y_(y), box_(std::move(box)), p_(x.cols()) {}

  bool Evaluate(const double* u, double* cost, double* gradient) const override {
    const GpHyperparameters hp = decode(u, box_, p_);
    const LmlTerms t = lml_with_gradient(x_, y_, hp, gradient != nullptr);
    if (!std::isfinite(t.value)) return false;
    cost[0] = -t.value;
    if (gradient) {
      for (Eigen::Index i = 0; i < p_ + 2; ++i) {
        const double s = sigmoid(u[i]);
        gradient[i] = -t.grad[i] * (box_.hi[i] - box_.lo[i]) * s * (1.0 - s);
      }
    }
    return true;
  }
  int NumParameters() const override { return static_cast<int>(p_ + 2); }

 private:
  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  LogBox box_;
  Eigen::Index p_;
};

}  // namespace

void CfGpModel::factorize() {
  const Eigen::MatrixXd kf = se_kernel(inputs_, inputs_, hp_);
  if (!factor_with_jitter(kf, hp_.noise_variance, llt_, jitter_)) {
    throw std::runtime_error("gp: kernel matrix is not positive definite even with maximal jitter");
  }
  alpha_ = llt_.solve(y_std_);
  const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  lml_ = -0.5 * y_std_.dot(alpha_) - 0.5 * log_det -
         0.5 * static_cast<double>(inputs_.rows()) * std::log(2.0 * std::numbers::pi);
}

CfGpModel CfGpModel::with_hyperparameters(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& y, const GpHyperparameters& hp) {
  if (x.rows() < 1 || x.rows() != z.size() || x.rows() != y.size()) {
    throw std::invalid_argument("gp: inconsistent training data");
  }
  if (hp.lengthscales.size() != x.cols() + 1) throw std::invalid_argument("gp: need one lengthscale per input plus fidelity");
  CfGpModel m;
  m.inputs_.resize(x.rows(), x.cols() + 1);
  m.inputs_ << x, z;
  m.y_mean_ = y.mean();
  const double var = (y.array() - m.y_mean_).square().mean();
  m.y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  m.y_std_ = (y.array() - m.y_mean_) / m.y_scale_;
  m.hp_ = hp;
  m.factorize();
  return m;
}

CfGpModel CfGpModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                         const GpFitOptions& options) {
  static std::once_flag quiet;
  std::call_once(quiet, [] { FLAGS_minloglevel = google::GLOG_ERROR; });
  if (x.rows() < 2) throw std::invalid_argument("gp: fit needs at least 2 points");
  const Eigen::Index p = x.cols() + 1;

  GpHyperparameters initial;
  initial.signal_variance = 1.0;
  initial.lengthscales = Eigen::VectorXd::Constant(p, 0.5);
  initial.noise_variance = 1e-3;
  CfGpModel model = with_hyperparameters(x, z, y, options.warm_start.value_or(initial));

  LogBox box;
  box.lo.resize(p + 2);
  box.hi.resize(p + 2);
  box.lo[0] = std::log(options.signal_min);
  box.hi[0] = std::log(options.signal_max);
  for (Eigen::Index i = 0; i < p; ++i) {
    const bool fidelity = i + 1 == p;
    box.lo[1 + i] = std::log(fidelity ? options.fidelity_lengthscale_min : options.lengthscale_min);
    box.hi[1 + i] = std::log(fidelity ? options.fidelity_lengthscale_max : options.lengthscale_max);
  }
  box.lo[p + 1] = std::log(options.noise_min);
  box.hi[p + 1] = std::log(options.noise_max);

  auto encode = [&](const GpHyperparameters& hp) {
    std::vector<double> u(static_cast<std::size_t>(p + 2));
    auto put = [&](Eigen::Index i, double v) {
      const double t = (std::log(v) - box.lo[i]) / (box.hi[i] - box.lo[i]);
      u[static_cast<std::size_t>(i)] = logit(std::clamp(t, 1e-6, 1.0 - 1e-6));
    };
    put(0, hp.signal_variance);
    for (Eigen::Index i = 0; i < p; ++i) put(1 + i, hp.lengthscales[i]);
    put(p + 1, hp.noise_variance);
    return u;
  };

  std::vector<std::vector<double>> starts;
  starts.push_back(encode(options.warm_start.value_or(initial)));
  Rng rng = make_stream(options.seed, {0x6770u});
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  for (std::size_t r = 1; r < options.restarts; ++r) {
    std::vector<double> u(static_cast<std::size_t>(p + 2));
    for (auto& v : u) v = logit(unit(rng));
    starts.push_back(std::move(u));
  }

  const Eigen::MatrixXd& xin = model.inputs_;
  const Eigen::VectorXd& ys = model.y_std_;
  double best = -std::numeric_limits<double>::infinity();
  GpHyperparameters best_hp = model.hp_;
  for (auto& u : starts) {
    ceres::GradientProblem problem(new NegLml(xin, ys, box));
    ceres::GradientProblemSolver::Options opts;
    opts.logging_type = ceres::SILENT;
    opts.max_num_iterations = static_cast<int>(options.max_iterations);
    opts.function_tolerance = 1e-10;
    opts.gradient_tolerance = 1e-8;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, problem, u.data(), &summary);
    const GpHyperparameters hp = decode(u.data(), box, p);
    const double v = lml_with_gradient(xin, ys, hp, false).value;
    if (v > best) {
      best = v;
      best_hp = hp;
    }
  }
  model.hp_ = best_hp;
  model.factorize();
  return model;
}

double CfGpModel::prior_std() const { return std::sqrt(hp_.signal_variance) * y_scale_; }

void CfGpModel::posterior(const Eigen::MatrixXd& xs, double z, Eigen::VectorXd& mean, Eigen::VectorXd& std) const {
  Eigen::MatrixXd q(xs.rows(), xs.cols() + 1);
  q << xs, Eigen::VectorXd::Constant(xs.rows(), z);
  const Eigen::MatrixXd ks = se_kernel(inputs_, q, hp_);  // n x m
  mean = (ks.transpose() * alpha_).array() * y_scale_ + y_mean_;
  const Eigen::MatrixXd v = llt_.matrixL().solve(ks);
  const Eigen::VectorXd var = (hp_.signal_variance - v.colwise().squaredNorm().transpose().array()).max(0.0);
  std = var.array().sqrt() * y_scale_;
}

Posterior CfGpModel::posterior(const Eigen::Ref<const Eigen::VectorXd>& x, double z) const {
  Eigen::VectorXd m, s;
  posterior(Eigen::MatrixXd(x.transpose()), z, m, s);
  return {m[0], s[0]};
}

double CfGpModel::posterior_covariance(const Eigen::Ref<const Eigen::VectorXd>& x1, double z1,
                                       const Eigen::Ref<const Eigen::VectorXd>& x2, double z2) const {
  Eigen::MatrixXd q(2, x1.size() + 1);
  q.row(0) << x1.transpose(), z1;
  q.row(1) << x2.transpose(), z2;
  const Eigen::MatrixXd ks = se_kernel(inputs_, q, hp_);
  const Eigen::MatrixXd v = llt_.matrixL().solve(ks);
  const double prior = se_kernel(q.row(0), q.row(1), hp_)(0, 0);
  return (prior - v.col(0).dot(v.col(1))) * y_scale_ * y_scale_;
}

SampledFunction CfGpModel::sample_function(std::uint64_t seed, std::size_t n_features) const {
  if (n_features == 0) throw std::invalid_argument("gp: n_features must be >= 1");
  Rng rng = make_stream(seed, {0x5346u});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
  const auto m = static_cast<Eigen::Index>(n_features);
  const Eigen::Index p = inputs_.cols();
  const Eigen::Index n = inputs_.rows();

  SampledFunction f;
  f.omega_.resize(m, p);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) f.omega_(i, k) = normal(rng) / hp_.lengthscales[k];
  }
  f.phase_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) f.phase_[i] = uphase(rng);
  const double amp = std::sqrt(2.0 * hp_.signal_variance / static_cast<double>(m));

  // Feature matrix of the training inputs (n x m).
  Eigen::MatrixXd phi = ((inputs_ * f.omega_.transpose()).rowwise() + f.phase_.transpose()).array().cos() * amp;

  // Posterior weight draw of the Bayesian linear model y = phi w + eps,
  // w ~ N(0, I): w = w0 + phi^T (phi phi^T + s2 I)^{-1} (y - phi w0 - eps).
  Eigen::VectorXd w0(m);
  for (Eigen::Index i = 0; i < m; ++i) w0[i] = normal(rng);
  const double noise = hp_.noise_variance + jitter_;
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = std::sqrt(noise) * normal(rng);
  Eigen::MatrixXd gram = phi * phi.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt;
  double extra = 0.0;
  if (!factor_with_jitter(gram, noise, llt, extra)) {
    throw std::runtime_error("gp: feature Gram matrix is not positive definite");
  }
  const Eigen::VectorXd resid = y_std_ - phi * w0 - eps;
  f.weights_ = (w0 + phi.transpose() * llt.solve(resid)) * amp;
  f.y_mean_ = y_mean_;
  f.y_scale_ = y_scale_;
  return f;
}

double SampledFunction::at(const Eigen::Ref<const Eigen::VectorXd>& x, double z) const {
  const Eigen::Index d = x.size();
  const Eigen::VectorXd proj = omega_.leftCols(d) * x + omega_.col(d) * z + phase_;
  return proj.array().cos().matrix().dot(weights_) * y_scale_ + y_mean_;
}

double SampledFunction::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const { return at(x, 1.0); }

Eigen::VectorXd SampledFunction::evaluate(const Eigen::MatrixXd& xs, double z) const {
  const Eigen::Index d = xs.cols();
  Eigen::MatrixXd proj = xs * omega_.leftCols(d).transpose();
  proj.rowwise() += (omega_.col(d) * z + phase_).transpose();
  // Single-precision cosine vectorizes; the phase error stays near 1e-6 rad.
  Eigen::ArrayXXf features = proj.cast<float>().array();
  features = features.cos();
  return (features.matrix().cast<double>() * weights_).array() * y_scale_ + y_mean_;
}

Eigen::VectorXd SampledFunction::evaluate(const Eigen::MatrixXd& xs) const { return evaluate(xs, 1.0); }

nlohmann::json CfGpModel::hyperparameters_json() const {
  nlohmann::json j;
  j["signal_variance"] = hp_.signal_variance;
  j["lengthscales"] = std::vector<double>(hp_.lengthscales.data(), hp_.lengthscales.data() + hp_.lengthscales.size());
  j["noise_variance"] = hp_.noise_variance;
  j["jitter"] = jitter_;
  j["output_mean"] = y_mean_;
  j["output_scale"] = y_scale_;
  j["log_marginal_likelihood"] = lml_;
  return j;
}

}  // namespace cfmesmo

// Independent reference implementations used only by tests. None of these
// call into the library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// ---- crossbar: plain fixed-point model of the DAC -> bit-sliced differential tiles -> ADC -> shift-add path.
struct CrossbarSetup {
  int bit_quan = 8;
  int res_cell = 2;
  int res_dac = 8;
  int res_adc = 8;
  int xbar = 128;
  double r_on = 3.03e3;
  double r_off = 3.03e6;
  double v_r = 1.65;
};

// weights: rows x cols signed codes; input: signed codes of `input_bits` bits.
inline std::vector<double> crossbar_mvm(const CrossbarSetup& s, const std::vector<std::vector<int>>& weights,
                                        const std::vector<int>& input, int input_bits) {
  const int rows = static_cast<int>(weights.size());
  const int cols = static_cast<int>(weights[0].size());
  const int slices = (s.bit_quan + s.res_cell - 1) / s.res_cell;
  const double g_min = 1.0 / s.r_off;
  const double g_max = 1.0 / s.r_on;
  const double step = (g_max - g_min) / ((1 << s.res_cell) - 1);
  const int in_max = std::max(1, (1 << (input_bits - 1)) - 1);
  const long dac_levels = (1L << s.res_dac) - 1;
  const bool dac_exact = dac_levels >= in_max;
  const double dac_full = dac_exact ? in_max : static_cast<double>(dac_levels);
  const long adc_top = (1L << s.res_adc) - 1;
  const double unit = step * s.v_r / dac_full;

  auto digit = [&](int magnitude, int slice) {
    const int shift = s.res_cell * (slices - 1 - slice);
    return (magnitude >> shift) & ((1 << s.res_cell) - 1);
  };
  auto dac = [&](int m) -> double {
    if (dac_exact) return m;
    return std::nearbyint(static_cast<double>(m) * dac_levels / in_max);
  };

  std::vector<double> out(cols, 0.0);
  for (int c = 0; c < cols; ++c) {
    double total = 0.0;
    for (int r0 = 0; r0 < rows; r0 += s.xbar) {
      const int nr = std::min(s.xbar, rows - r0);
      const double lsb = s.v_r * g_max * nr / static_cast<double>(adc_top);
      long acc = 0;
      for (int phase = 0; phase < 2; ++phase) {       // positive, then negative inputs
        for (int slice = 0; slice < slices; ++slice) {
          for (int side = 0; side < 2; ++side) {       // positive, then negative weight tile
            bool any = false;
            double current = 0.0;
            for (int i = r0; i < r0 + nr; ++i) {
              const int x = input[i];
              const int m = phase == 0 ? std::max(x, 0) : std::max(-x, 0);
              if (m != 0) any = true;
              const int w = weights[i][c];
              const bool here = side == 0 ? w > 0 : w < 0;
              const double g = g_min + (here ? digit(std::abs(w), slice) : 0) * step;
              current += s.v_r * dac(m) / dac_full * g;
            }
            if (!any) continue;
            double level = std::nearbyint(current / lsb);
            level = std::clamp(level, 0.0, static_cast<double>(adc_top));
            const long sign = (side == 0 ? 1 : -1) * (phase == 0 ? 1 : -1);
            acc += sign * (1L << (s.res_cell * (slices - 1 - slice))) * static_cast<long>(level);
          }
        }
      }
      total += static_cast<double>(acc) * (lsb / unit);
    }
    if (!dac_exact) total *= static_cast<double>(in_max) / static_cast<double>(dac_levels);
    out[c] = total;
  }
  return out;
}

// ---- GP: posterior by explicit inversion of the Gram matrix.
struct NaivePosterior {
  double mean;
  double std;
};

// x: n x d, z: n, y: n (raw). Kernel on standardized outputs with the given hyperparameters.
inline NaivePosterior gp_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                   double sf2, const Eigen::VectorXd& ls, double noise,
                                   const Eigen::VectorXd& xq, double zq) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double mean_y = y.mean();
  const double var_y = (y.array() - mean_y).square().mean();
  const double scale_y = var_y > 1e-24 ? std::sqrt(var_y) : 1.0;
  const Eigen::VectorXd ys = (y.array() - mean_y) / scale_y;
  auto k = [&](const Eigen::VectorXd& a, double za, const Eigen::VectorXd& b, double zb) {
    double r2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) r2 += std::pow((a[j] - b[j]) / ls[j], 2);
    r2 += std::pow((za - zb) / ls[d], 2);
    return sf2 * std::exp(-0.5 * r2);
  };
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = k(x.row(i).transpose(), z[i], x.row(j).transpose(), z[j]);
  }
  K.diagonal().array() += noise;
  const Eigen::MatrixXd Kinv = K.fullPivLu().inverse();
  Eigen::VectorXd kq(n);
  for (Eigen::Index i = 0; i < n; ++i) kq[i] = k(x.row(i).transpose(), z[i], xq, zq);
  const double m = kq.dot(Kinv * ys);
  const double v = std::max(0.0, sf2 - kq.dot(Kinv * kq));
  return {mean_y + scale_y * m, scale_y * std::sqrt(v)};
}

// ---- Pareto: O(n^2) pairwise filter under maximization.
inline bool dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  bool strict = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

inline std::vector<std::size_t> non_dominated(const Eigen::MatrixXd& pts) {
  std::vector<std::size_t> keep;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    bool dominated = false;
    for (Eigen::Index j = 0; j < pts.rows() && !dominated; ++j) {
      dominated = dominates(pts.row(j).transpose(), pts.row(i).transpose());
    }
    if (!dominated) keep.push_back(static_cast<std::size_t>(i));
  }
  return keep;
}

// Monte-Carlo hypervolume: estimate and its standard error.
inline std::pair<double, double> hypervolume_mc(const Eigen::MatrixXd& front, const Eigen::VectorXd& ref,
                                                std::size_t samples, std::uint64_t seed) {
  const Eigen::Index k = front.cols();
  Eigen::VectorXd hi = front.colwise().maxCoeff().transpose();
  double box = 1.0;
  for (Eigen::Index j = 0; j < k; ++j) box *= hi[j] - ref[j];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t hits = 0;
  Eigen::VectorXd p(k);
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index j = 0; j < k; ++j) p[j] = ref[j] + u(rng) * (hi[j] - ref[j]);
    for (Eigen::Index i = 0; i < front.rows(); ++i) {
      if (((front.row(i).transpose() - p).array() >= 0.0).all()) {
        ++hits;
        break;
      }
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  return {box * frac, box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples))};
}

// ---- Entropy reduction of a standard normal truncated above at gamma, by
// composite Simpson quadrature of the truncated density's differential entropy.
inline double truncated_entropy_gap(double gamma) {
  const double z = 0.5 * std::erfc(-gamma / std::sqrt(2.0));  // Phi(gamma)
  const double lo = std::min(gamma, 0.0) - 12.0;
  const int n = 200000;  // even
  const double h = (gamma - lo) / n;
  auto f = [&](double t) {
    const double p = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI) / z;
    return p > 0.0 ? -p * std::log(p) : 0.0;
  };
  double s = f(lo) + f(gamma);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  const double h_trunc = s * h / 3.0;
  const double h_normal = 0.5 * std::log(2.0 * M_PI * M_E);
  return h_normal - h_trunc;
}

// ---- One-shot least-squares linear classifier: accuracy on the test split.
inline double least_squares_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                                     const Eigen::MatrixXd& test_x, const std::vector<int>& test_y, int classes) {
  const Eigen::Index n = train_x.rows();
  Eigen::MatrixXd a(n, train_x.cols() + 1);
  a << train_x, Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) t(i, train_y[i]) = 1.0;
  const Eigen::MatrixXd w = a.colPivHouseholderQr().solve(t);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    Eigen::VectorXd row(test_x.cols() + 1);
    row << test_x.row(i).transpose(), 1.0;
    Eigen::Index best = 0;
    (w.transpose() * row).maxCoeff(&best);
    if (best == test_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.rows());
}

}  // namespace oracle

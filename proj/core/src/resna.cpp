#include "cfmesmo/resna.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cfmesmo/rng.hpp"

namespace cfmesmo {

Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2 || spec.dim == 0 || spec.train < static_cast<std::size_t>(spec.classes) || spec.test == 0) {
    throw std::invalid_argument("make_blobs: need >= 2 classes, dim >= 1 and non-empty splits");
  }
  Rng rng = make_stream(seed, {0x626c6f62u});
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Eigen::MatrixXd means(spec.classes, d);
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    for (Eigen::Index k = 0; k < d; ++k) means(c, k) = spec.separation * normal(rng) + spec.offset;
  }
  auto fill = [&](std::size_t n, Eigen::MatrixXd& x, std::vector<int>& y) {
    x.resize(static_cast<Eigen::Index>(n), d);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(spec.classes));
    std::shuffle(y.begin(), y.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (Eigen::Index k = 0; k < d; ++k) x(r, k) = means(y[i], k) + spec.noise_std * normal(rng);
    }
  };
  Dataset data;
  data.classes = spec.classes;
  fill(spec.train, data.train_x, data.train_y);
  fill(spec.test, data.test_x, data.test_y);
  return data;
}

void read_labeled_csv(std::istream& in, const std::string& source, Eigen::MatrixXd& x, std::vector<int>& y) {
  std::vector<std::vector<double>> rows;
  y.clear();
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size() && field.find_first_not_of(" \t", used) != std::string::npos) fail("bad number '" + field + "'");
        values.push_back(v);
      } catch (const std::logic_error&) {
        fail("bad number '" + field + "'");
      }
    }
    if (values.size() < 2) fail("expected a label and at least one feature");
    const double label = values.front();
    if (label < 0 || label != std::floor(label)) fail("label must be a non-negative integer");
    if (!rows.empty() && values.size() - 1 != rows.front().size()) fail("inconsistent feature count");
    y.push_back(static_cast<int>(label));
    rows.emplace_back(values.begin() + 1, values.end());
  }
  if (rows.empty()) throw std::runtime_error(source + ": no samples");
  x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
}

Dataset load_csv_dataset(const std::string& train_path, const std::string& test_path) {
  Dataset data;
  auto load = [](const std::string& path, Eigen::MatrixXd& x, std::vector<int>& y) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file " + path);
    read_labeled_csv(in, path, x, y);
  };
  load(train_path, data.train_x, data.train_y);
  load(test_path, data.test_x, data.test_y);
  if (data.train_x.cols() != data.test_x.cols()) throw std::runtime_error("dataset: train/test feature counts differ");
  const int top = std::max(*std::max_element(data.train_y.begin(), data.train_y.end()),
                           *std::max_element(data.test_y.begin(), data.test_y.end()));
  data.classes = top + 1;
  return data;
}

void MlpSpec::validate() const {
  if (widths.size() < 3) throw std::invalid_argument("mlp: need an input width and at least two layers");
  if (std::find(widths.begin(), widths.end(), std::size_t{0}) != widths.end()) {
    throw std::invalid_argument("mlp: layer widths must be positive");
  }
  if (voting_copies == 0 || voting_copies % 2 == 0) throw std::invalid_argument("mlp: voting_copies must be odd");
  if (batch_size == 0) throw std::invalid_argument("mlp: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("mlp: learning_rate must be > 0 and momentum in [0,1)");
  }
  if (activation_bits < 0 || activation_bits > 16) throw std::invalid_argument("mlp: activation_bits out of range");
  if (classifier_freq_hz <= 0.0 || classifier_temperature_k <= 0.0) {
    throw std::invalid_argument("mlp: classifier read context must be positive");
  }
}

namespace {

std::size_t layer_count(const TrainState& s) { return s.weights.size(); }

ReadSettings read_for_layer(const MlpSpec& spec, const ReramDesign& design, const NoiseSources& sources,
                            bool classifier) {
  ReadSettings r = ReadSettings::at_design(design, sources, spec.rtn);
  if (classifier && spec.reduce_classifier_noise) {
    r.freq_hz = spec.classifier_freq_hz;
    r.temperature_k = spec.classifier_temperature_k;
  }
  return r;
}

// Master weights deployed on crossbars for one forward pass or one inference run.
struct Deployment {
  std::vector<QuantizedMatrix> wq;
  std::vector<MappedLayer> layers;

  void build(const TrainState& s, const ReramDesign& design, std::size_t classifier_copies, Rng& rng,
             const NoiseSources& sources) {
    const std::size_t n = layer_count(s);
    wq.resize(n);
    layers.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
      wq[l] = quantize(s.weights[l], design.device.bit_quan);
      layers[l] = MappedLayer::map(wq[l], design, l + 1 == n ? classifier_copies : 1);
      layers[l].program(rng, sources);
    }
  }
};

Eigen::MatrixXd crossbar_affine(const MappedLayer& layer, const QuantizedMatrix& wq, const Eigen::VectorXd& bias,
                                const Eigen::MatrixXd& a, int act_bits, Rng& rng, const ReadSettings& read,
                                std::size_t copy) {
  Eigen::VectorXd scales;
  const QuantizedMatrix aq = quantize_rows(a, act_bits, scales);
  Eigen::MatrixXd out = layer.mvm_on_copy(aq, copy, rng, read);
  out.array().colwise() *= scales.array() * wq.scale;
  out.rowwise() += bias.transpose();
  return out;
}

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - m).exp();
    z.row(r) /= z.row(r).sum();
  }
}

double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  double loss = 0.0;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    loss -= std::log(std::max(probs(static_cast<Eigen::Index>(r), labels[idx[r]]), 1e-300));
  }
  return loss / static_cast<double>(idx.size());
}

int act_bits_of(const MlpSpec& spec, const ReramDesign& design) {
  return spec.activation_bits > 0 ? spec.activation_bits : design.device.bit_quan;
}

}  // namespace

double float_loss(const TrainState& state, const Dataset& data) {
  Eigen::MatrixXd a = data.train_x;
  for (std::size_t l = 0; l < layer_count(state); ++l) {
    Eigen::MatrixXd z = a * state.weights[l];
    z.rowwise() += state.biases[l].transpose();
    a = l + 1 == layer_count(state) ? z : z.cwiseMax(0.0);
  }
  softmax_rows(a);
  std::vector<std::size_t> idx(data.train_y.size());
  std::iota(idx.begin(), idx.end(), 0);
  return cross_entropy(a, data.train_y, idx);
}

TrainState train(const MlpSpec& spec, const ReramDesign& design, const Dataset& data, std::size_t epochs,
                 std::uint64_t seed, const TrainOptions& options) {
  spec.validate();
  if (epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
  if (spec.widths.front() != data.dim()) throw std::invalid_argument("train: input width does not match dataset");
  if (static_cast<int>(spec.widths.back()) < data.classes) throw std::invalid_argument("train: too few output units");

  Rng init_rng = make_stream(seed, {0x696e6974u});
  std::normal_distribution<double> normal(0.0, 1.0);
  TrainState s;
  const std::size_t n_layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto in = static_cast<Eigen::Index>(spec.widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.widths[l + 1]);
    const double std = std::sqrt(2.0 / static_cast<double>(in));
    Eigen::MatrixXd w(in, out);
    for (Eigen::Index j = 0; j < out; ++j) {
      for (Eigen::Index i = 0; i < in; ++i) w(i, j) = std * normal(init_rng);
    }
    s.weights.push_back(std::move(w));
    s.biases.push_back(Eigen::VectorXd::Zero(out));
    s.velocity_w.push_back(Eigen::MatrixXd::Zero(in, out));
    s.velocity_b.push_back(Eigen::VectorXd::Zero(out));
  }
  s.initial_loss = float_loss(s, data);

  const NoiseSources sources = options.noise_aware ? spec.sources : NoiseSources::none();
  const int act_bits = act_bits_of(spec, design);
  const std::size_t n = data.train_y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = make_stream(seed, {0x73687566u});
  std::vector<ReadSettings> reads;
  for (std::size_t l = 0; l < n_layers; ++l) reads.push_back(read_for_layer(spec, design, sources, l + 1 == n_layers));

  Deployment dep;
  std::vector<Eigen::MatrixXd> acts(n_layers + 1);
  std::vector<Eigen::MatrixXd> pre(n_layers);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng noise_rng = make_stream(seed, {0x6e6f6973u, epoch});
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += spec.batch_size) {
      const std::size_t stop = std::min(n, start + spec.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto b = static_cast<Eigen::Index>(idx.size());
      acts[0] = data.train_x(idx, Eigen::all);

      if (options.through_crossbar && (spec.resample_noise_per_batch || start == 0)) {
        dep.build(s, design, 1, noise_rng, sources);
      }
      for (std::size_t l = 0; l < n_layers; ++l) {
        if (options.through_crossbar) {
          if (!spec.resample_noise_per_batch && start != 0) {
            // Weights moved since programming: remap with the stored noise pattern skipped.
            dep.wq[l] = quantize(s.weights[l], design.device.bit_quan);
            dep.layers[l] = MappedLayer::map(dep.wq[l], design, 1);
            Rng frozen = make_stream(seed, {0x6e6f6973u, epoch, l});
            dep.layers[l].program(frozen, sources);
          }
          pre[l] = crossbar_affine(dep.layers[l], dep.wq[l], s.biases[l], acts[l], act_bits, noise_rng, reads[l], 0);
        } else {
          pre[l] = acts[l] * s.weights[l];
          pre[l].rowwise() += s.biases[l].transpose();
        }
        acts[l + 1] = l + 1 == n_layers ? pre[l] : pre[l].cwiseMax(0.0);
      }

      Eigen::MatrixXd delta = acts[n_layers];
      softmax_rows(delta);
      const double loss = cross_entropy(delta, data.train_y, idx);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch + 1));
      }
      loss_sum += loss;
      ++batches;
      for (Eigen::Index r = 0; r < b; ++r) delta(r, data.train_y[idx[static_cast<std::size_t>(r)]]) -= 1.0;
      delta /= static_cast<double>(b);

      // Straight-through backward pass on the master weights.
      for (std::size_t l = n_layers; l-- > 0;) {
        const Eigen::MatrixXd grad_w = acts[l].transpose() * delta;
        const Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
        if (l > 0) {
          delta = (delta * s.weights[l].transpose()).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        s.velocity_w[l] = spec.momentum * s.velocity_w[l] + grad_w;
        s.velocity_b[l] = spec.momentum * s.velocity_b[l] + grad_b;
        s.weights[l] -= spec.learning_rate * s.velocity_w[l];
        s.biases[l] -= spec.learning_rate * s.velocity_b[l];
      }
    }
    s.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    ++s.epochs;
  }
  return s;
}

int majority_vote(const std::vector<int>& predictions, const Eigen::Ref<const Eigen::VectorXd>& summed_logits) {
  if (predictions.empty()) throw std::invalid_argument("majority_vote: no predictions");
  std::vector<int> counts(static_cast<std::size_t>(summed_logits.size()), 0);
  for (int p : predictions) {
    if (p < 0 || p >= summed_logits.size()) throw std::out_of_range("majority_vote: class out of range");
    ++counts[static_cast<std::size_t>(p)];
  }
  int best = -1;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    if (counts[c] == 0) continue;
    if (best < 0 || counts[c] > counts[best] || (counts[c] == counts[best] && summed_logits[c] > summed_logits[best])) {
      best = c;
    }
  }
  return best;
}

InferenceResult infer(const TrainState& state, const MlpSpec& spec, const ReramDesign& design, const Dataset& data,
                      std::size_t runs, bool voting, std::uint64_t seed) {
  return infer(state, spec, design, data, runs, voting, seed, spec.sources);
}

InferenceResult infer(const TrainState& state, const MlpSpec& spec, const ReramDesign& design, const Dataset& data,
                      std::size_t runs, bool voting, std::uint64_t seed, const NoiseSources& sources) {
  if (runs == 0) throw std::invalid_argument("infer: runs must be >= 1");
  if (layer_count(state) == 0) throw std::invalid_argument("infer: untrained state");
  const std::size_t n_layers = layer_count(state);
  const std::size_t copies = voting ? spec.voting_copies : 1;
  const int act_bits = act_bits_of(spec, design);
  const std::size_t n = data.test_y.size();

  InferenceResult result;
  for (std::size_t run = 0; run < runs; ++run) {
    Rng rng = make_stream(seed, {0x696e6665u, run});
    Deployment dep;
    dep.build(state, design, copies, rng, sources);
    Eigen::MatrixXd a = data.test_x;
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
      a = crossbar_affine(dep.layers[l], dep.wq[l], state.biases[l], a, act_bits, rng,
                          read_for_layer(spec, design, sources, false), 0)
              .cwiseMax(0.0);
    }
    const ReadSettings cls_read = read_for_layer(spec, design, sources, true);
    std::vector<Eigen::MatrixXd> logits;
    for (std::size_t c = 0; c < copies; ++c) {
      logits.push_back(crossbar_affine(dep.layers.back(), dep.wq.back(), state.biases.back(), a, act_bits, rng,
                                       cls_read, c));
    }
    std::size_t correct = 0;
    std::vector<int> votes(copies);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      Eigen::VectorXd summed = Eigen::VectorXd::Zero(logits.front().cols());
      for (std::size_t c = 0; c < copies; ++c) {
        Eigen::Index arg = 0;
        logits[c].row(r).maxCoeff(&arg);
        votes[c] = static_cast<int>(arg);
        summed += logits[c].row(r).transpose();
      }
      if (majority_vote(votes, summed) == data.test_y[i]) ++correct;
    }
    result.per_run.push_back(static_cast<double>(correct) / static_cast<double>(n));
  }
  result.accuracy = std::accumulate(result.per_run.begin(), result.per_run.end(), 0.0) / static_cast<double>(runs);
  return result;
}

std::size_t epochs_for_fidelity(double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw std::invalid_argument("fidelity must lie in [0,1]");
  return static_cast<std::size_t>(std::lround(10.0 + 90.0 * z));
}

namespace {
double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}
}  // namespace

AccuracyEvaluation accuracy_objective(const ReramDesign& design, double z, const AccuracyObjectiveConfig& config,
                                      const Dataset& data, std::uint64_t seed) {
  const double t0 = thread_cpu_seconds();
  AccuracyEvaluation ev;
  ev.epochs = epochs_for_fidelity(z);
  const TrainState s = train(config.mlp, design, data, ev.epochs, seed);
  const InferenceResult r = infer(s, config.mlp, design, data, config.inference_runs, config.voting,
                                  make_stream(seed, {0x6576616cu})());
  ev.accuracy = r.accuracy;
  ev.per_run = r.per_run;
  ev.cost_seconds = thread_cpu_seconds() - t0;
  return ev;
}

}  // namespace cfmesmo

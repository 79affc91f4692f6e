#include "cfmesmo/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "cfmesmo/csv.hpp"

namespace cfmesmo {

namespace {

// One description of the YAML layout, walked by both the parser and the emitter.
template <class V>
void bind_nsga2(V& v, Nsga2Config& c) {
  v.value("population", c.population);
  v.value("generations", c.generations);
  v.value("crossover_prob", c.crossover_prob);
  v.value("crossover_eta", c.crossover_eta);
  v.value("mutation_eta", c.mutation_eta);
  v.value("mutation_prob", c.mutation_prob);
}

template <class V>
void bind(V& v, CampaignConfig& c) {
  v.value("problem", c.problem);
  v.value("optimizer", c.optimizer);
  v.value("seeds", c.seeds);
  v.value("output_dir", c.output_dir);
  v.value("workers", c.workers);
  v.value("record_cpu_time", c.record_cpu_time);

  auto& opt = c.optimizer_config;
  v.section("budget", [&] {
    v.value("total_cost", opt.budget.total_cost);
    v.value("max_iterations", opt.budget.max_iterations);
    v.value("convergence_epsilon", opt.budget.convergence_epsilon);
    v.value("convergence_window", opt.budget.convergence_window);
    v.value("initial_points", opt.budget.initial_points);
  });
  v.section("acquisition", [&] {
    auto& a = opt.acquisition;
    v.value("front_samples", a.front_samples);
    v.value("rff_features", a.rff_features);
    v.value("pool_size", a.pool_size);
    v.value("fidelity_levels", a.fidelity_levels);
    v.value("sigma_floor", a.sigma_floor);
    v.value("floor_at_observed", a.floor_at_observed);
    v.value("highest_fidelity_front", opt.highest_fidelity_front);
    v.section("inner_nsga2", [&] { bind_nsga2(v, a.inner); });
  });
  v.section("gp", [&] {
    auto& g = opt.gp;
    v.value("restarts", g.restarts);
    v.value("max_iterations", g.max_iterations);
    v.value("lengthscale_min", g.lengthscale_min);
    v.value("lengthscale_max", g.lengthscale_max);
    v.value("fidelity_lengthscale_min", g.fidelity_lengthscale_min);
    v.value("fidelity_lengthscale_max", g.fidelity_lengthscale_max);
    v.value("noise_min", g.noise_min);
    v.value("noise_max", g.noise_max);
    v.value("signal_min", g.signal_min);
    v.value("signal_max", g.signal_max);
  });
  v.section("baseline_nsga2", [&] { bind_nsga2(v, opt.baseline_nsga2); });

  v.section("synthetic", [&] {
    v.value("zdt1_dim", c.zdt1_dim);
    v.value("branin_bias", c.branin_bias);
    v.value("currin_bias", c.currin_bias);
    v.value("zdt1_bias", c.zdt1_bias);
    v.value("cost_c0", c.synthetic_cost.c0);
    v.value("cost_c1", c.synthetic_cost.c1);
  });

  auto& r = c.reram;
  v.section("design_space", [&] {
    v.value("res_cell_levels", r.bounds.res_cell_levels);
    v.value("freq_min_hz", r.bounds.freq_min_hz);
    v.value("freq_max_hz", r.bounds.freq_max_hz);
    v.value("log_frequency", r.bounds.log_frequency);
    v.value("temperature_min_k", r.bounds.temperature_min_k);
    v.value("temperature_max_k", r.bounds.temperature_max_k);
    v.value("xbar_levels", r.bounds.xbar_levels);
  });
  v.section("device", [&] {
    v.value("bit_quan", r.device.bit_quan);
    v.value("r_on", r.device.r_on);
    v.value("r_off", r.device.r_off);
    v.value("res_dac", r.device.res_dac);
    v.value("res_adc", r.device.res_adc);
    v.value("v_r", r.device.v_r);
    v.value("sigma_prog", r.device.sigma_prog);
  });
  auto& mlp = r.accuracy.mlp;
  v.section("noise", [&] {
    v.value("thermal", mlp.sources.thermal);
    v.value("shot", mlp.sources.shot);
    v.value("rtn", mlp.sources.rtn);
    v.value("programming", mlp.sources.programming);
    v.value("rtn_amp_coeff_a", mlp.rtn.amp_coeff_a);
    v.value("rtn_amp_coeff_b", mlp.rtn.amp_coeff_b);
    v.value("rtn_p_occupancy", mlp.rtn.p_occupancy);
  });
  v.section("resna", [&] {
    v.value("widths", mlp.widths);
    v.value("voting_copies", mlp.voting_copies);
    v.value("voting", r.accuracy.voting);
    v.value("reduce_classifier_noise", mlp.reduce_classifier_noise);
    v.value("classifier_freq_hz", mlp.classifier_freq_hz);
    v.value("classifier_temperature_k", mlp.classifier_temperature_k);
    v.value("batch_size", mlp.batch_size);
    v.value("learning_rate", mlp.learning_rate);
    v.value("momentum", mlp.momentum);
    v.value("activation_bits", mlp.activation_bits);
    v.value("resample_noise_per_batch", mlp.resample_noise_per_batch);
    v.value("inference_runs", r.accuracy.inference_runs);
    v.section("dataset", [&] {
      auto& d = r.accuracy.data;
      v.value("seed", r.accuracy.data_seed);
      v.value("train_csv", r.accuracy.train_csv);
      v.value("test_csv", r.accuracy.test_csv);
      v.value("classes", d.classes);
      v.value("dim", d.dim);
      v.value("train", d.train);
      v.value("test", d.test);
      v.value("separation", d.separation);
      v.value("noise_std", d.noise_std);
      v.value("offset", d.offset);
    });
  });
  v.section("hardware", [&] {
    auto& h = r.hw;
    v.value("cell_area_um2", h.cell_area_um2);
    v.value("adc_area_um2", h.adc_area_um2);
    v.value("dac_area_um2", h.dac_area_um2);
    v.value("cols_per_adc", h.cols_per_adc);
    v.value("read_cycles", h.read_cycles);
    v.value("adc_energy_j", h.adc_energy_j);
    v.value("dac_energy_j", h.dac_energy_j);
    v.value("reference_margin", r.reference_margin);
  });
}

std::string join_path(const std::vector<std::string>& path, const std::string& key) {
  std::string out;
  for (const auto& p : path) out += p + ".";
  return out + key;
}

int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

class Parser {
 public:
  explicit Parser(const YAML::Node& root) { push(root); }

  template <class T>
  void value(const char* key, T& out) {
    seen_.back().insert(key);
    const YAML::Node n = nodes_.back()[key];
    if (!n.IsDefined() || n.IsNull()) return;
    convert(n, join_path(path_, key), out);
  }

  void section(const char* key, const std::function<void()>& body) {
    seen_.back().insert(key);
    const YAML::Node n = nodes_.back()[key];
    if (!n.IsDefined() || n.IsNull()) return;
    if (!n.IsMap()) {
      throw ConfigError(join_path(path_, key) + " (line " + std::to_string(line_of(n)) + "): expected a mapping");
    }
    path_.push_back(key);
    push(n);
    body();
    pop();
    path_.pop_back();
  }

  void finish() { pop(); }

 private:
  void push(const YAML::Node& n) {
    nodes_.push_back(n);
    seen_.emplace_back();
  }

  void pop() {
    const YAML::Node& n = nodes_.back();
    for (auto it = n.begin(); it != n.end(); ++it) {
      const auto key = it->first.as<std::string>();
      if (!seen_.back().count(key)) {
        throw ConfigError("unknown key '" + join_path(path_, key) + "' at line " + std::to_string(line_of(it->first)));
      }
    }
    nodes_.pop_back();
    seen_.pop_back();
  }

  [[noreturn]] static void fail(const YAML::Node& n, const std::string& path, const std::string& what) {
    throw ConfigError(path + " (line " + std::to_string(line_of(n)) + "): expected " + what);
  }

  static std::string scalar(const YAML::Node& n, const std::string& path, const char* what) {
    if (!n.IsScalar()) fail(n, path, what);
    return n.Scalar();
  }

  static void convert(const YAML::Node& n, const std::string& path, std::string& out) {
    out = scalar(n, path, "a string");
  }

  static void convert(const YAML::Node& n, const std::string& path, bool& out) {
    scalar(n, path, "true or false");
    try {
      out = n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, path, "true or false");
    }
  }

  static void convert(const YAML::Node& n, const std::string& path, double& out) {
    const std::string s = scalar(n, path, "a number");
    std::size_t used = 0;
    try {
      out = std::stod(s, &used);
    } catch (const std::exception&) {
      fail(n, path, "a number");
    }
    if (used != s.size()) fail(n, path, "a number");
  }

  template <class T>
    requires std::is_integral_v<T> && (!std::is_same_v<T, bool>)
  static void convert(const YAML::Node& n, const std::string& path, T& out) {
    const std::string s = scalar(n, path, "an integer");
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      fail(n, path, "an integer");
    }
    if (used != s.size()) fail(n, path, "an integer");
    if (std::is_unsigned_v<T> && v < 0) fail(n, path, "a non-negative integer");
    if (!std::in_range<T>(v)) {
      fail(n, path, "an integer in range");
    }
    out = static_cast<T>(v);
  }

  template <class T>
  static void convert(const YAML::Node& n, const std::string& path, std::vector<T>& out) {
    if (!n.IsSequence()) fail(n, path, "a list");
    out.clear();
    for (std::size_t i = 0; i < n.size(); ++i) {
      T item{};
      convert(n[i], path + "[" + std::to_string(i) + "]", item);
      out.push_back(item);
    }
  }

  std::vector<YAML::Node> nodes_;
  std::vector<std::set<std::string>> seen_;
  std::vector<std::string> path_;
};

class Emitter {
 public:
  Emitter() { out_ << YAML::BeginMap; }

  template <class T>
  void value(const char* key, const T& v) {
    out_ << YAML::Key << key << YAML::Value;
    write(v);
  }

  void section(const char* key, const std::function<void()>& body) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    body();
    out_ << YAML::EndMap;
  }

  std::string finish() {
    out_ << YAML::EndMap;
    return std::string(out_.c_str()) + "\n";
  }

 private:
  void write(const std::string& s) { out_ << YAML::DoubleQuoted << s; }
  void write(bool b) { out_ << (b ? "true" : "false"); }
  void write(double d) { out_ << format_double(d); }
  template <class T>
    requires std::is_integral_v<T>
  void write(T v) {
    out_ << std::to_string(v);
  }
  template <class T>
  void write(const std::vector<T>& v) {
    out_ << YAML::Flow << YAML::BeginSeq;
    for (const auto& item : v) write(item);
    out_ << YAML::EndSeq;
  }

  YAML::Emitter out_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("invalid config: " + message);
}

bool positive(double v) { return v > 0.0 && v < std::numeric_limits<double>::infinity(); }
bool unit(double v) { return v >= 0.0 && v <= 1.0; }

void validate_nsga2(const Nsga2Config& n, const std::string& where) {
  require(n.population >= 2, where + ".population must be at least 2");
  require(unit(n.crossover_prob), where + ".crossover_prob must lie in [0, 1]");
  require(n.crossover_eta >= 0.0 && n.mutation_eta >= 0.0, where + ": distribution indices must be non-negative");
  require(n.mutation_prob <= 1.0, where + ".mutation_prob must be at most 1 (negative selects 1/dim)");
}

}  // namespace

CampaignConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("YAML syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  CampaignConfig config;
  if (root.IsNull()) return config;
  if (!root.IsMap()) throw ConfigError("top level (line " + std::to_string(line_of(root)) + "): expected a mapping");
  Parser parser(root);
  bind(parser, config);
  parser.finish();
  validate_config(config);
  return config;
}

CampaignConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string emit_config(const CampaignConfig& config) {
  Emitter emitter;
  bind(emitter, const_cast<CampaignConfig&>(config));
  return emitter.finish();
}

void validate_config(const CampaignConfig& c) {
  require(c.problem == "reram" || c.problem == "branin-currin-cf" || c.problem == "zdt1",
          "problem must be reram, branin-currin-cf or zdt1, got '" + c.problem + "'");
  try {
    parse_optimizer(c.optimizer);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: optimizer: ") + e.what());
  }
  require(!c.seeds.empty(), "seeds must list at least one seed");
  require(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "seeds must be distinct");
  require(!c.output_dir.empty(), "output_dir must be non-empty");
  require(c.workers >= 1, "workers must be at least 1");

  const auto& o = c.optimizer_config;
  require(positive(o.budget.total_cost), "budget.total_cost must be positive");
  require(o.budget.max_iterations >= 1, "budget.max_iterations must be at least 1");
  require(o.budget.convergence_epsilon >= 0.0, "budget.convergence_epsilon must be non-negative");
  require(o.budget.convergence_window >= 1, "budget.convergence_window must be at least 1");
  require(o.budget.initial_points >= 1, "budget.initial_points must be at least 1");

  const auto& a = o.acquisition;
  require(a.front_samples >= 1, "acquisition.front_samples must be at least 1");
  require(a.rff_features >= 1, "acquisition.rff_features must be at least 1");
  require(a.pool_size >= 1, "acquisition.pool_size must be at least 1");
  require(a.fidelity_levels >= 2, "acquisition.fidelity_levels must be at least 2");
  require(positive(a.sigma_floor), "acquisition.sigma_floor must be positive");
  validate_nsga2(a.inner, "acquisition.inner_nsga2");
  validate_nsga2(o.baseline_nsga2, "baseline_nsga2");

  const auto& g = o.gp;
  require(g.restarts >= 1, "gp.restarts must be at least 1");
  auto range = [](double lo, double hi) { return positive(lo) && positive(hi) && lo <= hi; };
  require(range(g.lengthscale_min, g.lengthscale_max), "gp lengthscale bounds must satisfy 0 < min <= max");
  require(range(g.fidelity_lengthscale_min, g.fidelity_lengthscale_max),
          "gp fidelity lengthscale bounds must satisfy 0 < min <= max");
  require(range(g.noise_min, g.noise_max), "gp noise bounds must satisfy 0 < min <= max");
  require(range(g.signal_min, g.signal_max), "gp signal bounds must satisfy 0 < min <= max");

  require(c.zdt1_dim >= 2, "synthetic.zdt1_dim must be at least 2");
  require(c.branin_bias >= 0.0 && c.currin_bias >= 0.0 && c.zdt1_bias >= 0.0, "synthetic biases must be non-negative");
  require(positive(c.synthetic_cost.c0) && c.synthetic_cost.c1 >= 0.0,
          "synthetic cost needs cost_c0 > 0 and cost_c1 >= 0");

  const auto& r = c.reram;
  const auto& dev = r.device;
  require(dev.bit_quan >= 1 && dev.bit_quan <= 16, "device.bit_quan must lie in [1, 16]");
  require(positive(dev.r_on) && positive(dev.r_off) && dev.r_on < dev.r_off, "device needs 0 < r_on < r_off");
  require(dev.res_dac >= 1 && dev.res_dac <= 16, "device.res_dac must lie in [1, 16]");
  require(dev.res_adc >= 0 && dev.res_adc <= 24, "device.res_adc must lie in [0, 24] (0 is ideal)");
  require(positive(dev.v_r), "device.v_r must be positive");
  require(dev.sigma_prog >= 0.0, "device.sigma_prog must be non-negative");
  for (int lv : r.bounds.res_cell_levels) {
    require(lv >= 1 && lv <= dev.bit_quan, "design_space.res_cell_levels must lie in [1, bit_quan]");
  }
  for (int lv : r.bounds.xbar_levels) require(lv >= 2, "design_space.xbar_levels must be at least 2");
  try {
    DesignSpace space(r.bounds, dev);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  const auto& mlp = r.accuracy.mlp;
  require(mlp.rtn.amp_coeff_a >= 0.0 && mlp.rtn.amp_coeff_b >= 0.0, "noise RTN amplitude coefficients must be non-negative");
  require(unit(mlp.rtn.p_occupancy), "noise.rtn_p_occupancy must lie in [0, 1]");
  try {
    mlp.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: resna: ") + e.what());
  }
  const auto& acc = r.accuracy;
  require(acc.inference_runs >= 1, "resna.inference_runs must be at least 1");
  require(acc.train_csv.empty() == acc.test_csv.empty(), "resna.dataset needs both train_csv and test_csv or neither");
  if (acc.train_csv.empty()) {
    require(acc.data.classes >= 2, "resna.dataset.classes must be at least 2");
    require(acc.data.train >= 1 && acc.data.test >= 1, "resna.dataset sizes must be positive");
    require(acc.data.dim == mlp.widths.front(), "resna.widths must start with resna.dataset.dim");
    require(mlp.widths.back() == static_cast<std::size_t>(acc.data.classes),
            "resna.widths must end with resna.dataset.classes");
    require(acc.data.noise_std >= 0.0 && acc.data.separation >= 0.0, "resna.dataset spreads must be non-negative");
  }
  const auto& h = r.hw;
  require(positive(h.cell_area_um2) && positive(h.adc_area_um2) && positive(h.dac_area_um2),
          "hardware areas must be positive");
  require(h.cols_per_adc >= 1, "hardware.cols_per_adc must be at least 1");
  require(h.read_cycles >= 0.0, "hardware.read_cycles must be non-negative");
  require(positive(h.adc_energy_j) && positive(h.dac_energy_j), "hardware energies must be positive");
  require(r.reference_margin >= 0.0, "hardware.reference_margin must be non-negative");
}

CampaignConfig canonical_config(const CampaignConfig& config) {
  CampaignConfig c = config;
  const CampaignConfig defaults;
  c.output_dir = defaults.output_dir;
  c.workers = defaults.workers;
  return c;
}

std::string config_hash(const CampaignConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : emit_config(canonical_config(config))) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return out;
}

void apply_environment(CampaignConfig& config) {
  if (const char* dir = std::getenv("CFMESMO_OUT_DIR"); dir && *dir) config.output_dir = dir;
  if (const char* w = std::getenv("CFMESMO_WORKERS"); w && *w) {
    const std::string s(w);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 1) throw ConfigError("CFMESMO_WORKERS must be a positive integer, got '" + s + "'");
    config.workers = static_cast<std::size_t>(v);
  }
}

std::unique_ptr<MooProblem> make_problem(const CampaignConfig& config) {
  if (config.problem == "reram") return std::make_unique<ReramProblem>(config.reram);
  if (config.problem == "branin-currin-cf") {
    auto p = std::make_unique<BraninCurrinCf>();
    p->bias_scale_1 = config.branin_bias;
    p->bias_scale_2 = config.currin_bias;
    p->cost_model = config.synthetic_cost;
    return p;
  }
  if (config.problem == "zdt1") {
    auto p = std::make_unique<Zdt1Cf>(config.zdt1_dim);
    p->bias_scale = config.zdt1_bias;
    p->cost_model = config.synthetic_cost;
    return p;
  }
  throw ConfigError("unknown problem '" + config.problem + "'");
}

}  // namespace cfmesmo

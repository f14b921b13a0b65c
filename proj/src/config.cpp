#include "almt/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace almt {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Eigen::VectorXd parse_vector(const std::string& s, const std::string& key) {
  const std::vector<std::string> parts = split(s, ',');
  if (parts.empty()) throw std::invalid_argument("config: empty vector for " + key);
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = std::stod(parts[i]);
  return v;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v(i));
  }
  return out;
}

Strategy strategy_from(const std::string& s) {
  if (s == "passive") return Strategy::Passive;
  if (s == "target-agnostic") return Strategy::TargetAgnostic;
  if (s == "target-aware") return Strategy::TargetAware;
  throw std::invalid_argument("config: unknown strategy '" + s + "'");
}

Oracle oracle_from(const std::string& s, const std::string& key) {
  if (s == "alt-min") return Oracle::AltMin;
  if (s == "joint-erm") return Oracle::JointErm;
  throw std::invalid_argument("config: unknown oracle '" + s + "' for " + key);
}

std::string oracle_name(Oracle o) { return o == Oracle::AltMin ? "alt-min" : "joint-erm"; }

using KeyMap = std::map<std::string, std::string>;  // "section.key" -> value

KeyMap read_keys(const std::string& text) {
  KeyMap keys;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: bad section header at line " +
                                    std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(lineno));
    const std::string key = section + "." + trim(line.substr(0, eq));
    if (keys.count(key)) throw std::invalid_argument("config: duplicate key " + key);
    keys[key] = trim(line.substr(eq + 1));
  }
  return keys;
}

class KeyReader {
 public:
  explicit KeyReader(KeyMap keys) : keys_(std::move(keys)) {}

  bool has(const std::string& key) const { return keys_.count(key) > 0; }
  std::string require(const std::string& key) {
    auto it = keys_.find(key);
    if (it == keys_.end()) throw std::invalid_argument("config: missing required key " + key);
    used_.insert(key);
    return it->second;
  }
  std::string get(const std::string& key, const std::string& fallback) {
    auto it = keys_.find(key);
    if (it == keys_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }
  double get_num(const std::string& key, double fallback) {
    auto it = keys_.find(key);
    if (it == keys_.end()) return fallback;
    used_.insert(key);
    return std::stod(it->second);
  }
  long long get_int(const std::string& key, long long fallback) {
    auto it = keys_.find(key);
    if (it == keys_.end()) return fallback;
    used_.insert(key);
    return std::stoll(it->second);
  }
  void reject_unknown() const {
    for (const auto& [key, value] : keys_)
      if (!used_.count(key)) throw std::invalid_argument("config: unknown key " + key);
  }

 private:
  KeyMap keys_;
  std::set<std::string> used_;
};

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::SyntheticBilinear: return "synthetic-bilinear";
    case Scenario::SyntheticFourier: return "synthetic-fourier";
    case Scenario::Pendulum: return "pendulum";
  }
  return "?";
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Passive: return "passive";
    case Strategy::TargetAgnostic: return "target-agnostic";
    case Strategy::TargetAware: return "target-aware";
  }
  return "?";
}

ExperimentConfig parse_config_text(const std::string& text) {
  KeyReader keys(read_keys(text));
  ExperimentConfig cfg;

  const std::string scenario = keys.require("experiment.scenario");
  if (scenario == "synthetic-bilinear") cfg.scenario = Scenario::SyntheticBilinear;
  else if (scenario == "synthetic-fourier") cfg.scenario = Scenario::SyntheticFourier;
  else if (scenario == "pendulum") cfg.scenario = Scenario::Pendulum;
  else throw std::invalid_argument("config: unknown scenario '" + scenario + "'");

  for (const std::string& name : split(keys.require("experiment.strategies"), ',')) {
    const Strategy s = strategy_from(name);
    if (std::find(cfg.strategies.begin(), cfg.strategies.end(), s) != cfg.strategies.end())
      throw std::invalid_argument("config: duplicate strategy '" + name + "'");
    cfg.strategies.push_back(s);
  }
  if (cfg.strategies.empty()) throw std::invalid_argument("config: empty strategy list");

  for (const std::string& s : split(keys.require("experiment.seeds"), ','))
    cfg.seeds.push_back(std::stoull(s));
  if (cfg.seeds.empty()) throw std::invalid_argument("config: empty seed list");
  cfg.out_dir = keys.get("experiment.out_dir", "out");

  if (cfg.scenario == Scenario::Pendulum) {
    cfg.dims = Dimensions{2, static_cast<int>(keys.get_int("dims.d_psi_x", 60)), 6, 5, 13,
                          static_cast<int>(keys.get_int("dims.k", 8))};
  } else {
    cfg.dims.d_x = static_cast<int>(keys.get_int("dims.d_x", 20));
    cfg.dims.d_psi_x = static_cast<int>(keys.get_int("dims.d_psi_x", cfg.dims.d_x));
    cfg.dims.d_w = static_cast<int>(keys.get_int("dims.d_w", 10));
    cfg.dims.d_w_source = static_cast<int>(keys.get_int("dims.d_w_source", cfg.dims.d_w));
    cfg.dims.d_psi_w = static_cast<int>(keys.get_int("dims.d_psi_w", cfg.dims.d_w));
    cfg.dims.k = static_cast<int>(keys.get_int("dims.k", 2));
  }
  cfg.dims.validate();
  if (cfg.scenario == Scenario::SyntheticBilinear && cfg.dims.d_psi_x != cfg.dims.d_x)
    throw std::invalid_argument("config: synthetic-bilinear requires d_psi_x == d_x");
  if (cfg.scenario != Scenario::Pendulum && cfg.dims.d_psi_w != cfg.dims.d_w)
    throw std::invalid_argument("config: synthetic scenarios require d_psi_w == d_w");

  const std::string cond = keys.get("model.conditioning", "well");
  if (cond == "well") cfg.conditioning = Conditioning::Well;
  else if (cond == "ill") cfg.conditioning = Conditioning::Ill;
  else throw std::invalid_argument("config: model.conditioning must be well or ill");
  cfg.kappa = keys.get_num("model.kappa", 1.0);
  if (cfg.kappa < 1.0) throw std::invalid_argument("config: model.kappa must be >= 1");
  cfg.sigma = keys.get_num("model.sigma", cfg.scenario == Scenario::Pendulum ? 0.7071067811865476 : 0.0);
  cfg.fourier_scale = keys.get_num("model.fourier_scale", 1.0);

  const std::string target_kind = keys.get(
      "target.kind",
      cfg.scenario == Scenario::Pendulum ? "pendulum-dummy" : "weakest-source-direction");
  if (target_kind == "weakest-source-direction") {
    cfg.target.kind = TargetConfig::Kind::WeakestSourceDirection;
  } else if (target_kind == "axis") {
    cfg.target.kind = TargetConfig::Kind::Axis;
    cfg.target.axis = static_cast<int>(keys.get_int("target.axis", 0));
  } else if (target_kind == "explicit") {
    cfg.target.kind = TargetConfig::Kind::Explicit;
    const std::vector<std::string> parts = split(keys.require("target.vectors"), ';');
    cfg.target.vectors.resize(cfg.dims.d_w, static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Eigen::VectorXd v = parse_vector(parts[i], "target.vectors");
      if (v.size() != cfg.dims.d_w)
        throw std::invalid_argument("config: target vector dim != dims.d_w");
      cfg.target.vectors.col(static_cast<Eigen::Index>(i)) = v;
    }
    if (keys.has("target.weights")) {
      cfg.target.weights = parse_vector(keys.require("target.weights"), "target.weights");
    } else {
      cfg.target.weights = Eigen::VectorXd::Constant(
          cfg.target.vectors.cols(), 1.0 / static_cast<double>(cfg.target.vectors.cols()));
    }
  } else if (target_kind == "pendulum-dummy") {
    if (cfg.scenario != Scenario::Pendulum)
      throw std::invalid_argument("config: target.kind pendulum-dummy needs scenario pendulum");
    cfg.target.kind = TargetConfig::Kind::PendulumDummy;
    cfg.target.pendulum_actual =
        keys.has("target.actual")
            ? parse_vector(keys.require("target.actual"), "target.actual")
            : (Eigen::VectorXd(6) << 0.8, 0.3, 0.5, 0.5, 0.3, 0.0).finished();
    if (cfg.target.pendulum_actual.size() != 6)
      throw std::invalid_argument("config: target.actual must be 6-dim");
  } else {
    throw std::invalid_argument("config: unknown target.kind '" + target_kind + "'");
  }
  cfg.target.n_target = static_cast<int>(keys.get_int("target.n_target", 2000));
  cfg.target.dot_n_target = static_cast<int>(keys.get_int("target.dot_n_target", 500));

  StageBudgets& b = cfg.learner.budgets;
  b.n0 = keys.get_int("budgets.n0", 1000);
  b.beta1 = keys.get_num("budgets.beta1", 1.0);
  b.beta2 = keys.get_num("budgets.beta2", 1.0);
  b.beta3 = keys.get_num("budgets.beta3", 8.0);
  b.epochs = static_cast<int>(keys.get_int("budgets.epochs", 4));
  b.budget_cap = keys.get_int("budgets.budget_cap", 0);
  b.kappa_bar = keys.get_num("budgets.kappa_bar", std::sqrt(static_cast<double>(cfg.dims.d_w)));
  b.sigma_lower = keys.get_num("budgets.sigma_lower", 1.0);
  const std::string n2_policy = keys.get("budgets.n2_policy", "formula");
  if (n2_policy == "formula") b.n2_policy = StageBudgets::N2Policy::Formula;
  else if (n2_policy == "fixed") b.n2_policy = StageBudgets::N2Policy::Fixed;
  else throw std::invalid_argument("config: budgets.n2_policy must be formula or fixed");
  b.n2_fixed = keys.get_int("budgets.n2_fixed", 0);
  b.agnostic_boost = keys.get_num("budgets.agnostic_boost", 1.0);

  const std::string gamma_mode = keys.get("budgets.gamma_mode", "formula");
  if (gamma_mode == "formula") cfg.learner.gamma.mode = GammaPolicy::Mode::Formula;
  else if (gamma_mode == "fixed") cfg.learner.gamma.mode = GammaPolicy::Mode::Fixed;
  else throw std::invalid_argument("config: budgets.gamma_mode must be formula or fixed");
  cfg.learner.gamma.fixed_value = keys.get_num("budgets.gamma", 0.0);
  cfg.learner.save_task_threshold = keys.get_num("budgets.save_task_threshold", 0.8);
  cfg.learner.warmup_probes = static_cast<int>(keys.get_int("budgets.warmup_probes",
      cfg.scenario == Scenario::Pendulum ? 2 * cfg.dims.k : 0));
  cfg.learner.adaptive_rounds = static_cast<int>(keys.get_int("budgets.adaptive_rounds", 5));
  cfg.learner.adaptive_pool = static_cast<int>(keys.get_int("budgets.adaptive_pool", 50));

  TrainConfig& t = cfg.learner.train;
  t.am_iters = static_cast<int>(keys.get_int("train.am_iters", 25));
  t.gd_steps = static_cast<int>(keys.get_int("train.gd_steps", 300));
  t.gd_lr = keys.get_num("train.gd_lr", 0.05);
  t.batch = static_cast<int>(keys.get_int("train.batch", 0));
  t.ridge = keys.get_num("train.ridge", 0.0);
  cfg.learner.head_ridge = keys.get_num("train.head_ridge", 0.0);
  cfg.learner.stage0_oracle = oracle_from(keys.get("train.stage0_oracle", "alt-min"), "train.stage0_oracle");
  cfg.learner.stage2_oracle = oracle_from(keys.get("train.stage2_oracle", "alt-min"), "train.stage2_oracle");
  cfg.learner.stage3_oracle = oracle_from(keys.get("train.stage3_oracle", "joint-erm"), "train.stage3_oracle");
  cfg.learner.passive_oracle = oracle_from(keys.get("train.passive_oracle", "alt-min"), "train.passive_oracle");

  cfg.n_test = static_cast<int>(keys.get_int("eval.n_test", 2000));

  if (cfg.scenario == Scenario::Pendulum) {
    cfg.pendulum.mass = keys.get_num("pendulum.mass", 1.0);
    cfg.pendulum.length = keys.get_num("pendulum.length", 1.0);
    cfg.pendulum.gravity = keys.get_num("pendulum.gravity", 9.8);
    cfg.pendulum.dt = keys.get_num("pendulum.dt", 0.02);
    cfg.pendulum.kp = keys.get_num("pendulum.kp", 4.0);
    cfg.pendulum.kd = keys.get_num("pendulum.kd", 4.0);
    cfg.pendulum.horizon = static_cast<int>(keys.get_int("pendulum.horizon", 500));
    cfg.pendulum.label_sigma = cfg.sigma;
  } else if (keys.has("pendulum.dt") || keys.has("pendulum.mass")) {
    throw std::invalid_argument("config: [pendulum] section requires scenario = pendulum");
  }

  keys.reject_unknown();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "[experiment]\n";
  out += "scenario = " + to_string(cfg.scenario) + "\n";
  out += "strategies = ";
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i)
    out += (i ? "," : "") + to_string(cfg.strategies[i]);
  out += "\nseeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    out += (i ? "," : "") + std::to_string(cfg.seeds[i]);
  out += "\nout_dir = " + cfg.out_dir + "\n";

  out += "[dims]\n";
  if (cfg.scenario != Scenario::Pendulum) {
    out += "d_x = " + std::to_string(cfg.dims.d_x) + "\n";
    out += "d_w = " + std::to_string(cfg.dims.d_w) + "\n";
    out += "d_w_source = " + std::to_string(cfg.dims.d_w_source) + "\n";
    out += "d_psi_w = " + std::to_string(cfg.dims.d_psi_w) + "\n";
  }
  out += "d_psi_x = " + std::to_string(cfg.dims.d_psi_x) + "\n";
  out += "k = " + std::to_string(cfg.dims.k) + "\n";

  out += "[model]\n";
  out += std::string("conditioning = ") + (cfg.conditioning == Conditioning::Well ? "well" : "ill") + "\n";
  out += "kappa = " + fmt_double(cfg.kappa) + "\n";
  out += "sigma = " + fmt_double(cfg.sigma) + "\n";
  out += "fourier_scale = " + fmt_double(cfg.fourier_scale) + "\n";

  out += "[target]\n";
  switch (cfg.target.kind) {
    case TargetConfig::Kind::WeakestSourceDirection:
      out += "kind = weakest-source-direction\n";
      break;
    case TargetConfig::Kind::Axis:
      out += "kind = axis\naxis = " + std::to_string(cfg.target.axis) + "\n";
      break;
    case TargetConfig::Kind::Explicit: {
      out += "kind = explicit\nvectors = ";
      for (Eigen::Index i = 0; i < cfg.target.vectors.cols(); ++i)
        out += (i ? "; " : "") + format_vector(cfg.target.vectors.col(i));
      out += "\nweights = " + format_vector(cfg.target.weights) + "\n";
      break;
    }
    case TargetConfig::Kind::PendulumDummy:
      out += "kind = pendulum-dummy\nactual = " + format_vector(cfg.target.pendulum_actual) + "\n";
      break;
  }
  out += "n_target = " + std::to_string(cfg.target.n_target) + "\n";
  out += "dot_n_target = " + std::to_string(cfg.target.dot_n_target) + "\n";

  const StageBudgets& b = cfg.learner.budgets;
  out += "[budgets]\n";
  out += "n0 = " + std::to_string(b.n0) + "\n";
  out += "beta1 = " + fmt_double(b.beta1) + "\n";
  out += "beta2 = " + fmt_double(b.beta2) + "\n";
  out += "beta3 = " + fmt_double(b.beta3) + "\n";
  out += "epochs = " + std::to_string(b.epochs) + "\n";
  out += "budget_cap = " + std::to_string(b.budget_cap) + "\n";
  out += "kappa_bar = " + fmt_double(b.kappa_bar) + "\n";
  out += "sigma_lower = " + fmt_double(b.sigma_lower) + "\n";
  out += std::string("n2_policy = ") +
         (b.n2_policy == StageBudgets::N2Policy::Formula ? "formula" : "fixed") + "\n";
  out += "n2_fixed = " + std::to_string(b.n2_fixed) + "\n";
  out += "agnostic_boost = " + fmt_double(b.agnostic_boost) + "\n";
  out += std::string("gamma_mode = ") +
         (cfg.learner.gamma.mode == GammaPolicy::Mode::Formula ? "formula" : "fixed") + "\n";
  out += "gamma = " + fmt_double(cfg.learner.gamma.fixed_value) + "\n";
  out += "save_task_threshold = " + fmt_double(cfg.learner.save_task_threshold) + "\n";
  out += "warmup_probes = " + std::to_string(cfg.learner.warmup_probes) + "\n";
  out += "adaptive_rounds = " + std::to_string(cfg.learner.adaptive_rounds) + "\n";
  out += "adaptive_pool = " + std::to_string(cfg.learner.adaptive_pool) + "\n";

  const TrainConfig& t = cfg.learner.train;
  out += "[train]\n";
  out += "am_iters = " + std::to_string(t.am_iters) + "\n";
  out += "gd_steps = " + std::to_string(t.gd_steps) + "\n";
  out += "gd_lr = " + fmt_double(t.gd_lr) + "\n";
  out += "batch = " + std::to_string(t.batch) + "\n";
  out += "ridge = " + fmt_double(t.ridge) + "\n";
  out += "head_ridge = " + fmt_double(cfg.learner.head_ridge) + "\n";
  out += "stage0_oracle = " + oracle_name(cfg.learner.stage0_oracle) + "\n";
  out += "stage2_oracle = " + oracle_name(cfg.learner.stage2_oracle) + "\n";
  out += "stage3_oracle = " + oracle_name(cfg.learner.stage3_oracle) + "\n";
  out += "passive_oracle = " + oracle_name(cfg.learner.passive_oracle) + "\n";

  out += "[eval]\n";
  out += "n_test = " + std::to_string(cfg.n_test) + "\n";

  if (cfg.scenario == Scenario::Pendulum) {
    out += "[pendulum]\n";
    out += "mass = " + fmt_double(cfg.pendulum.mass) + "\n";
    out += "length = " + fmt_double(cfg.pendulum.length) + "\n";
    out += "gravity = " + fmt_double(cfg.pendulum.gravity) + "\n";
    out += "dt = " + fmt_double(cfg.pendulum.dt) + "\n";
    out += "kp = " + fmt_double(cfg.pendulum.kp) + "\n";
    out += "kd = " + fmt_double(cfg.pendulum.kd) + "\n";
    out += "horizon = " + std::to_string(cfg.pendulum.horizon) + "\n";
  }
  return out;
}

}  // namespace almt

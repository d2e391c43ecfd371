#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rydgate/piecewise.hpp"
#include "rydgate/trpo.hpp"

namespace rydgate {

/// User-input problem (bad key, bad value, bad file). Distinguished from
/// numerical failures so the CLI can map them to different exit codes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulation produced values outside its accuracy contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode {
  SynchronousIU,
  SynchronousTU,
  PiecewiseAdiabatic1,
  PiecewiseAdiabatic2,
  PiecewiseNonAdiabatic,
};

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::SynchronousIU: return "synchronous-iu";
    case RunMode::SynchronousTU: return "synchronous-tu";
    case RunMode::PiecewiseAdiabatic1: return "piecewise-adiabatic-1";
    case RunMode::PiecewiseAdiabatic2: return "piecewise-adiabatic-2";
    case RunMode::PiecewiseNonAdiabatic: return "piecewise-nonadiabatic";
  }
  throw std::logic_error("unknown run mode");
}

inline RunMode parse_run_mode(const std::string& s) {
  for (RunMode m : {RunMode::SynchronousIU, RunMode::SynchronousTU,
                    RunMode::PiecewiseAdiabatic1, RunMode::PiecewiseAdiabatic2,
                    RunMode::PiecewiseNonAdiabatic})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown mode '" + s +
                    "' (expected synchronous-iu, synchronous-tu, piecewise-adiabatic-1, "
                    "piecewise-adiabatic-2 or piecewise-nonadiabatic)");
}

inline bool is_piecewise(RunMode m) {
  return m == RunMode::PiecewiseAdiabatic1 || m == RunMode::PiecewiseAdiabatic2 ||
         m == RunMode::PiecewiseNonAdiabatic;
}

/// Fully resolved run description. Frequencies in the config file are quoted
/// in MHz/kHz (the /2pi convention) and converted to rad/us here, at the one
/// boundary where units enter.
struct RunConfig {
  std::string experiment = "run";
  RunMode mode = RunMode::SynchronousIU;
  PhysicalParams physics;
  TrpoConfig trpo;
  std::uint64_t epochs = 10;
  std::string out_dir;  // empty: resolved from the output root at run time
  int workers = 1;      // orchestration stays single-threaded; accepted for forward compat
  int checkpoint_interval = 1000;
  double cutoff_threshold = 0.02;
  std::vector<int> hidden_layers = {156, 48, 16};
  std::set<std::string> keys_set;  // which keys the config file spelled out

  bool is_set(const std::string& key) const { return keys_set.count(key) > 0; }

  void validate() const {
    physics.validate();
    trpo.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
    if (!(cutoff_threshold > 0.0 && cutoff_threshold <= 0.1))
      throw ConfigError("cutoff_threshold must be in (0, 0.1]");
    if (hidden_layers.empty()) throw ConfigError("agent.hidden_layers must not be empty");
    for (int h : hidden_layers)
      if (h < 1) throw ConfigError("agent.hidden_layers entries must be >= 1");
    if (experiment.empty()) throw ConfigError("experiment name must not be empty");
  }

  /// Piecewise-protocol settings: mode defaults, overridden only by the
  /// physics keys the config file set explicitly.
  PiecewiseConfig piecewise() const {
    PiecewiseMode pm;
    switch (mode) {
      case RunMode::PiecewiseAdiabatic1: pm = PiecewiseMode::AdiabaticI; break;
      case RunMode::PiecewiseAdiabatic2: pm = PiecewiseMode::AdiabaticII; break;
      case RunMode::PiecewiseNonAdiabatic: pm = PiecewiseMode::NonAdiabatic; break;
      default: throw std::logic_error("piecewise() called on a synchronous mode");
    }
    PiecewiseConfig c = PiecewiseConfig::defaults(pm, physics);
    if (is_set("physics.n_steps")) c.n_steps = physics.n_steps;
    if (is_set("physics.t_total_us")) c.t_total = physics.t_total;
    if (is_set("physics.xi_omega")) c.xi_omega = physics.xi_omega;
    if (is_set("physics.xi_phi")) c.xi_phi = physics.xi_phi;
    if (is_set("physics.omega_t_max_mhz")) c.omega_t_max = physics.omega_t_max;
    return c;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double_value(const std::string& v) {
  size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("'" + v + "' is not a number");
  }
  if (pos != v.size()) throw ConfigError("'" + v + "' is not a number");
  return d;
}

inline long long parse_int_value(const std::string& v) {
  size_t pos = 0;
  long long i;
  try {
    i = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("'" + v + "' is not an integer");
  }
  if (pos != v.size()) throw ConfigError("'" + v + "' is not an integer");
  return i;
}

inline std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::istringstream ss(v);
  std::string field;
  while (std::getline(ss, field, ','))
    out.push_back(static_cast<int>(parse_int_value(trim(field))));
  return out;
}

inline int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

using KeySetter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, KeySetter>& config_key_table() {
  auto str = [](std::string RunConfig::* f) {
    return [f](RunConfig& c, const std::string& v) { c.*f = v; };
  };
  auto dbl = [](double RunConfig::* f) {
    return [f](RunConfig& c, const std::string& v) { c.*f = parse_double_value(v); };
  };
  auto num = [](auto field, double scale = 1.0) {
    return [field, scale](RunConfig& c, const std::string& v) {
      field(c) = scale * parse_double_value(v);
    };
  };
  auto cnt = [](auto field) {
    return [field](RunConfig& c, const std::string& v) {
      field(c) = static_cast<int>(parse_int_value(v));
    };
  };
  static const std::map<std::string, KeySetter> table = {
      {"experiment", str(&RunConfig::experiment)},
      {"mode", [](RunConfig& c, const std::string& v) { c.mode = parse_run_mode(v); }},
      {"epochs",
       [](RunConfig& c, const std::string& v) {
         const long long e = parse_int_value(v);
         if (e < 0) throw ConfigError("epochs must be >= 0");
         c.epochs = static_cast<std::uint64_t>(e);
       }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         const long long s = parse_int_value(v);
         if (s < 0) throw ConfigError("seed must be >= 0");
         c.trpo.seed = static_cast<std::uint64_t>(s);
       }},
      {"out_dir", str(&RunConfig::out_dir)},
      {"workers", cnt([](RunConfig& c) -> int& { return c.workers; })},
      {"checkpoint_interval",
       cnt([](RunConfig& c) -> int& { return c.checkpoint_interval; })},
      {"cutoff_threshold", dbl(&RunConfig::cutoff_threshold)},
      {"agent.hidden_layers",
       [](RunConfig& c, const std::string& v) { c.hidden_layers = parse_int_list(v); }},
      // Physical parameters: config quotes frequencies as /2pi values.
      {"physics.omega_gl_mhz",
       num([](RunConfig& c) -> double& { return c.physics.omega_gl; }, kTwoPi)},
      {"physics.delta_mhz",
       num([](RunConfig& c) -> double& { return c.physics.delta; }, kTwoPi)},
      {"physics.v0_mhz",
       num([](RunConfig& c) -> double& { return c.physics.v0; }, kTwoPi)},
      {"physics.gamma_e_mhz",
       num([](RunConfig& c) -> double& { return c.physics.gamma_e; }, kTwoPi)},
      {"physics.gamma_r_khz",
       num([](RunConfig& c) -> double& { return c.physics.gamma_r; }, kTwoPi * 1e-3)},
      {"physics.omega_c_max_mhz",
       num([](RunConfig& c) -> double& { return c.physics.omega_c_max; }, kTwoPi)},
      {"physics.omega_t_max_mhz",
       num([](RunConfig& c) -> double& { return c.physics.omega_t_max; }, kTwoPi)},
      {"physics.eta_e", num([](RunConfig& c) -> double& { return c.physics.eta_e; })},
      {"physics.eta_r", num([](RunConfig& c) -> double& { return c.physics.eta_r; })},
      {"physics.t_total_us",
       num([](RunConfig& c) -> double& { return c.physics.t_total; })},
      {"physics.n_steps", cnt([](RunConfig& c) -> int& { return c.physics.n_steps; })},
      {"physics.xi_omega",
       num([](RunConfig& c) -> double& { return c.physics.xi_omega; })},
      {"physics.xi_phi", num([](RunConfig& c) -> double& { return c.physics.xi_phi; })},
      {"physics.r0_um", num([](RunConfig& c) -> double& { return c.physics.r0; })},
      {"physics.trap_omega_khz",
       num([](RunConfig& c) -> double& { return c.physics.trap_omega; }, kTwoPi * 1e-3)},
      // Trust-region optimizer.
      {"trpo.kl_bound", num([](RunConfig& c) -> double& { return c.trpo.kl_bound; })},
      {"trpo.gamma_disc",
       num([](RunConfig& c) -> double& { return c.trpo.gamma_disc; })},
      {"trpo.gae_lambda",
       num([](RunConfig& c) -> double& { return c.trpo.gae_lambda; })},
      {"trpo.episodes_per_update",
       cnt([](RunConfig& c) -> int& { return c.trpo.episodes_per_update; })},
      {"trpo.cg_iterations",
       cnt([](RunConfig& c) -> int& { return c.trpo.cg_iterations; })},
      {"trpo.cg_damping",
       num([](RunConfig& c) -> double& { return c.trpo.cg_damping; })},
      {"trpo.line_search_steps",
       cnt([](RunConfig& c) -> int& { return c.trpo.line_search_steps; })},
      {"trpo.line_search_shrink",
       num([](RunConfig& c) -> double& { return c.trpo.line_search_shrink; })},
      {"trpo.critic_epochs",
       cnt([](RunConfig& c) -> int& { return c.trpo.critic_epochs; })},
      {"trpo.critic_step_size",
       num([](RunConfig& c) -> double& { return c.trpo.critic_step_size; })},
      {"trpo.initial_sigma",
       num([](RunConfig& c) -> double& { return c.trpo.initial_sigma; })},
  };
  return table;
}

inline std::string nearest_config_key(const std::string& key) {
  std::string best;
  int best_d = std::numeric_limits<int>::max();
  for (const auto& [k, _] : config_key_table()) {
    // A user may drop the namespace, so score the bare name too.
    const auto dot = k.rfind('.');
    int d = edit_distance(key, k);
    if (dot != std::string::npos)
      d = std::min(d, edit_distance(key, k.substr(dot + 1)));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

/// Parse a flat key = value config. Lines may carry '#' comments; blank lines
/// are skipped. Every error names the source and line it came from.
inline RunConfig parse_run_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where() + "expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto& table = detail::config_key_table();
    const auto it = table.find(key);
    if (it == table.end())
      throw ConfigError(where() + "unknown key '" + key + "' (did you mean '" +
                        detail::nearest_config_key(key) + "'?)");
    if (value.empty()) throw ConfigError(where() + "key '" + key + "' has no value");
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + key + ": " + e.what());
    }
    cfg.keys_set.insert(key);
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  return parse_run_config(in, path);
}

}  // namespace rydgate

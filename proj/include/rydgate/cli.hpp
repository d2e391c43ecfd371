#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rydgate/config.hpp"
#include "rydgate/thermal.hpp"
#include "rydgate/trainer.hpp"

namespace rydgate {

using Json = nlohmann::ordered_json;

/// Fidelities are reported as decimal strings with six significant digits.
inline std::string fidelity_string(double f) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", f);
  return buf;
}

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError(what + " is not finite");
}

/// Output directory precedence: command line, config file, then
/// $RYDGATE_OUT_ROOT/<experiment> (default root "runs").
inline std::string resolve_out_dir(const RunConfig& cfg, const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  const char* root = std::getenv("RYDGATE_OUT_ROOT");
  return std::string(root && *root ? root : "runs") + "/" + cfg.experiment;
}

/// Every parameter that affects numerical results, resolved to internal units.
inline Json manifest_json(const RunConfig& cfg, const std::string& out_dir) {
  Json m;
  m["engine_version"] = kEngineVersion;
  m["experiment"] = cfg.experiment;
  m["mode"] = to_string(cfg.mode);
  m["epochs"] = cfg.epochs;
  m["seed"] = cfg.trpo.seed;
  m["out_dir"] = out_dir;
  m["workers"] = cfg.workers;
  m["checkpoint_interval"] = cfg.checkpoint_interval;
  m["cutoff_threshold"] = cfg.cutoff_threshold;
  const PhysicalParams& p = cfg.physics;
  m["physics"] = {{"omega_gl_rad_per_us", p.omega_gl},
                  {"delta_rad_per_us", p.delta},
                  {"v0_rad_per_us", p.v0},
                  {"gamma_e_rad_per_us", p.gamma_e},
                  {"gamma_r_rad_per_us", p.gamma_r},
                  {"omega_c_max_rad_per_us", p.omega_c_max},
                  {"omega_t_max_rad_per_us", p.omega_t_max},
                  {"eta_e", p.eta_e},
                  {"eta_r", p.eta_r},
                  {"t_total_us", p.t_total},
                  {"n_steps", p.n_steps},
                  {"xi_omega", p.xi_omega},
                  {"xi_phi", p.xi_phi},
                  {"r0_um", p.r0},
                  {"trap_omega_rad_per_us", p.trap_omega},
                  {"mass_kg", p.mass},
                  {"k1_rad_per_m", p.k1},
                  {"k2_rad_per_m", p.k2}};
  const TrpoConfig& t = cfg.trpo;
  m["agent"] = {{"hidden_layers", cfg.hidden_layers},
                {"kl_bound", t.kl_bound},
                {"gamma_disc", t.gamma_disc},
                {"gae_lambda", t.gae_lambda},
                {"episodes_per_update", t.episodes_per_update},
                {"cg_iterations", t.cg_iterations},
                {"cg_damping", t.cg_damping},
                {"line_search_steps", t.line_search_steps},
                {"line_search_shrink", t.line_search_shrink},
                {"critic_epochs", t.critic_epochs},
                {"critic_step_size", t.critic_step_size},
                {"initial_sigma", t.initial_sigma}};
  if (is_piecewise(cfg.mode)) {
    const PiecewiseConfig pc = cfg.piecewise();
    m["piecewise"] = {{"xi_omega", pc.xi_omega},
                      {"xi_phi", pc.xi_phi},
                      {"omega_t_max_rad_per_us", pc.omega_t_max},
                      {"omega_c_rad_per_us", pc.omega_c},
                      {"t_total_us", pc.t_total},
                      {"n_steps", pc.n_steps}};
  }
  return m;
}

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Trainer::EnvFactory make_env_factory(const RunConfig& cfg) {
  const PhysicalParams p = cfg.physics;
  const double th = cfg.cutoff_threshold;
  if (is_piecewise(cfg.mode)) {
    const PiecewiseConfig pc = cfg.piecewise();
    return [p, pc, th] { return std::make_unique<PiecewiseEnv>(p, pc, th); };
  }
  const ActionMode am = cfg.mode == RunMode::SynchronousTU ? ActionMode::TU : ActionMode::IU;
  return [p, am, th] { return std::make_unique<GateEnv>(p, am, th); };
}

/// Replay metrics for a synchronous-mode schedule: evaluated at the detected
/// cutoff and, separately, over the full horizon.
inline Json sync_eval_json(const PulseSchedule& s, const RunConfig& cfg) {
  const PhysicalParams& p = cfg.physics;
  const double tau = detect_cutoff(s, p, cfg.cutoff_threshold);
  const GateMetrics at_tau = evaluate_schedule(s, p, tau, -1.0, 0.0, cfg.cutoff_threshold);
  const GateMetrics full = evaluate_schedule(s, p, -1.0, -1.0, 0.0, cfg.cutoff_threshold);
  require_finite(at_tau.f_avg, "F_avg at tau_min");
  require_finite(full.f_avg, "F_avg at t_total");
  Json e;
  e["tau_min_us"] = tau;
  e["f_avg_at_tau_min"] = fidelity_string(at_tau.f_avg);
  e["f_avg_at_t_total"] = fidelity_string(full.f_avg);
  e["f_channel_at_tau_min"] = {fidelity_string(at_tau.f_channel[0]),
                               fidelity_string(at_tau.f_channel[1]),
                               fidelity_string(at_tau.f_channel[2]),
                               fidelity_string(at_tau.f_channel[3])};
  e["gamma_e_te"] = at_tau.gamma_e_te;
  e["gamma_r_tr"] = at_tau.gamma_r_tr;
  return e;
}

/// Replay metrics for a piecewise-mode target schedule, including the square
/// control pulses and the control-atom round-trip error for the composite gate.
inline Json piecewise_eval_json(const PulseSchedule& s, const RunConfig& cfg) {
  const PiecewiseConfig pc = cfg.piecewise();
  const PiecewiseMetrics full =
      evaluate_piecewise_schedule(s, cfg.physics, pc, -1.0, cfg.cutoff_threshold);
  const PiecewiseMetrics at_tau =
      evaluate_piecewise_schedule(s, cfg.physics, pc, full.tau_min, cfg.cutoff_threshold);
  const SquarePulseCalibration cal = square_pi_schedule(cfg.physics, pc.omega_c);
  const double eps = epsilon_control(cfg.physics, at_tau.tau_min, pc.omega_c);
  const double f_avg = piecewise_f_avg(at_tau.f00, at_tau.f10, eps);
  require_finite(at_tau.f_t, "F_t at tau_min");
  require_finite(f_avg, "piecewise F_avg");
  Json e;
  e["tau_min_us"] = at_tau.tau_min;
  e["t_sq_us"] = cal.t_sq;
  e["f00"] = fidelity_string(at_tau.f00);
  e["f10"] = fidelity_string(at_tau.f10);
  e["f_t"] = fidelity_string(at_tau.f_t);
  e["f_t_at_t_total"] = fidelity_string(full.f_t);
  e["eps_control"] = eps;
  e["f_avg"] = fidelity_string(f_avg);
  e["gamma_e_te"] = at_tau.gamma_e_te;
  e["gamma_r_tr"] = at_tau.gamma_r_tr;
  return e;
}

inline Json eval_json(const PulseSchedule& s, const RunConfig& cfg) {
  try {
    return is_piecewise(cfg.mode) ? piecewise_eval_json(s, cfg) : sync_eval_json(s, cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());  // grid mismatch / out-of-range values
  }
}

struct TrainCliOptions {
  std::string config_path;
  std::string out_dir;          // overrides config + environment
  std::string resume_path;      // checkpoint to continue from
  long long epochs_override = -1;
  double target_fidelity = -1.0;  // stop early once the best fidelity reaches this
  bool quiet = false;
};

inline int cmd_train(const TrainCliOptions& opt) {
  RunConfig cfg = load_run_config(opt.config_path);
  if (opt.epochs_override >= 0) cfg.epochs = static_cast<std::uint64_t>(opt.epochs_override);
  const std::string out = resolve_out_dir(cfg, opt.out_dir);
  std::filesystem::create_directories(out);
  write_json(manifest_json(cfg, out), out + "/manifest.json");

  TrainerOptions topt;
  topt.hidden_layers = cfg.hidden_layers;
  topt.checkpoint_interval = cfg.checkpoint_interval;
  topt.out_dir = out;

  std::unique_ptr<Trainer> trainer;
  if (!opt.resume_path.empty()) {
    Checkpoint ck = load_checkpoint(opt.resume_path);
    trainer = std::make_unique<Trainer>(make_env_factory(cfg), std::move(ck), topt);
  } else {
    trainer = std::make_unique<Trainer>(make_env_factory(cfg), cfg.trpo, topt);
  }

  const std::uint64_t report_every =
      std::max<std::uint64_t>(cfg.trpo.episodes_per_update, 100);
  Trainer::Callback cb = [&](const EpochStats& st) {
    if (!opt.quiet && st.epoch % report_every == 0)
      std::printf("epoch %6d  best %.6f  tau_min %.4f us  kl %.2e\n", st.epoch,
                  st.best_fidelity, st.tau_min, st.kl);
  };
  const std::uint64_t epu = static_cast<std::uint64_t>(cfg.trpo.episodes_per_update);
  const std::uint64_t chunk = std::max<std::uint64_t>(epu, (100 / epu) * epu);
  while (trainer->state().episodes_done < cfg.epochs) {
    if (opt.target_fidelity > 0.0 && trainer->best_fidelity() >= opt.target_fidelity) break;
    trainer->run(std::min(cfg.epochs, trainer->state().episodes_done + chunk), cb);
  }

  Json metrics;
  metrics["experiment"] = cfg.experiment;
  metrics["mode"] = to_string(cfg.mode);
  metrics["seed"] = cfg.trpo.seed;
  metrics["epochs_done"] = trainer->state().episodes_done;
  metrics["best_fidelity"] = fidelity_string(trainer->best_fidelity());
  metrics["best_tau_min_us"] = trainer->state().best_tau_min;
  if (trainer->best_schedule().size() > 0)
    metrics["eval"] = eval_json(trainer->best_schedule(), cfg);
  write_json(metrics, out + "/metrics.json");
  if (!opt.quiet)
    std::printf("run complete: %s  best fidelity %s after %llu epochs\n", out.c_str(),
                fidelity_string(trainer->best_fidelity()).c_str(),
                static_cast<unsigned long long>(trainer->state().episodes_done));
  return 0;
}

inline int cmd_eval(const std::string& pulse_csv, const std::string& config_path,
                    const std::string& out_path) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  const PulseSchedule s = PulseSchedule::read_csv(pulse_csv);
  const Json e = eval_json(s, cfg);
  if (out_path.empty())
    std::cout << e.dump(2) << "\n";
  else
    write_json(e, out_path);
  return 0;
}

inline int cmd_sweep_thermal(const std::string& pulse_csv, const std::string& config_path,
                             const std::vector<double>& temps, const std::string& effect_name,
                             bool counter_propagating, int mc_shots, std::uint64_t mc_seed,
                             const std::string& out_path) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (is_piecewise(cfg.mode))
    throw ConfigError("sweep-thermal expects a synchronous-mode config");
  ThermalEffect effect;
  if (effect_name == "doppler")
    effect = ThermalEffect::Doppler;
  else if (effect_name == "interaction")
    effect = ThermalEffect::Interaction;
  else if (effect_name == "both")
    effect = ThermalEffect::Both;
  else
    throw ConfigError("unknown effect '" + effect_name +
                      "' (expected doppler, interaction or both)");
  const PulseSchedule s = PulseSchedule::read_csv(pulse_csv);
  ThermalConfig tc;
  tc.temperatures_uK = temps;
  tc.counter_propagating = counter_propagating;
  tc.monte_carlo_shots = mc_shots;
  tc.seed = mc_seed;
  std::vector<ThermalPoint> rows;
  try {
    rows = thermal_sweep(s, cfg.physics, tc, effect);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& r : rows) require_finite(r.f_avg, "swept F_avg");
  if (!out_path.empty()) write_thermal_csv(rows, out_path);
  std::printf("%8s %12s %18s %12s %12s\n", "T_uK", "effect", "delta_D_rad_per_us", "f_avg",
              "delta_f");
  for (const auto& r : rows)
    std::printf("%8.3g %12s %18.6g %12.6g %12.4g\n", r.t_uK, to_string(r.effect).c_str(),
                r.delta_d, r.f_avg, r.delta_f);
  return 0;
}

namespace detail {

struct ReportRow {
  std::string method, experiment;
  double xi_omega = 0.0, xi_phi = 0.0;
  std::uint64_t epochs = 0;
  double tau_min = 0.0, gamma_e_te = 0.0, gamma_r_tr = 0.0;
  std::string f_avg;
  std::string f_avg_thermal, delta_f;  // blank unless a thermal sweep exists
  bool piecewise = false;
  double t_sq = 0.0, eps_control = 0.0;
  std::string f_t;
};

inline ReportRow report_row(const std::string& dir) {
  if (!std::filesystem::exists(dir + "/manifest.json"))
    throw ConfigError("run directory " + dir + " has no manifest.json");
  const Json manifest = read_json(dir + "/manifest.json");
  if (!std::filesystem::exists(dir + "/metrics.json"))
    throw ConfigError("missing metrics file " + dir + "/metrics.json");
  const Json metrics = read_json(dir + "/metrics.json");

  ReportRow row;
  row.method = manifest.at("mode").get<std::string>();
  row.experiment = manifest.at("experiment").get<std::string>();
  row.piecewise = manifest.contains("piecewise");
  const Json& xi_src = row.piecewise ? manifest.at("piecewise") : manifest.at("physics");
  row.xi_omega = xi_src.at("xi_omega").get<double>();
  row.xi_phi = xi_src.at("xi_phi").get<double>();
  row.epochs = metrics.at("epochs_done").get<std::uint64_t>();
  if (metrics.contains("eval")) {
    const Json& e = metrics.at("eval");
    row.tau_min = e.at("tau_min_us").get<double>();
    row.gamma_e_te = e.at("gamma_e_te").get<double>();
    row.gamma_r_tr = e.at("gamma_r_tr").get<double>();
    row.f_avg = e.at(row.piecewise ? "f_avg" : "f_avg_at_tau_min").get<std::string>();
    if (row.piecewise) {
      row.t_sq = e.at("t_sq_us").get<double>();
      row.eps_control = e.at("eps_control").get<double>();
      row.f_t = e.at("f_t").get<std::string>();
    }
  } else {
    row.tau_min = metrics.at("best_tau_min_us").get<double>();
    row.f_avg = metrics.at("best_fidelity").get<std::string>();
  }
  if (std::filesystem::exists(dir + "/thermal.csv")) {
    std::ifstream in(dir + "/thermal.csv");
    std::string line, last;
    std::getline(in, line);  // header
    while (std::getline(in, line))
      if (!line.empty()) last = line;
    if (!last.empty()) {
      std::istringstream ss(last);
      std::vector<std::string> f;
      std::string field;
      while (std::getline(ss, field, ',')) f.push_back(field);
      if (f.size() == 6) {
        row.f_avg_thermal = f[4];
        row.delta_f = f[5];
      }
    }
  }
  return row;
}

}  // namespace detail

inline int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_csv,
                      const std::string& piecewise_out_csv) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  std::vector<detail::ReportRow> rows;
  for (const auto& d : run_dirs) rows.push_back(detail::report_row(d));

  std::ostringstream csv;
  csv << "method,case,xi_omega,xi_phi,epochs,tau_min_us,gamma_e_te,gamma_r_tr,"
         "f_avg,f_avg_thermal,delta_f\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%g,%g,%llu,%.17g,%.17g,%.17g,%s,%s,%s\n",
                  r.method.c_str(), r.experiment.c_str(), r.xi_omega, r.xi_phi,
                  static_cast<unsigned long long>(r.epochs), r.tau_min, r.gamma_e_te,
                  r.gamma_r_tr, r.f_avg.c_str(), r.f_avg_thermal.c_str(), r.delta_f.c_str());
    csv << buf;
  }
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot open " + out_csv + " for writing");
    out << csv.str();
  }

  // Markdown view of the same table.
  std::printf("| method | case | xi_O | xi_phi | epochs | tau_min (us) | g_e T_e | g_r T_r "
              "| F_avg | F_avg(T) | dF |\n");
  std::printf("|---|---|---|---|---|---|---|---|---|---|---|\n");
  for (const auto& r : rows)
    std::printf("| %s | %s | %g | %g | %llu | %.4g | %.3g | %.3g | %s | %s | %s |\n",
                r.method.c_str(), r.experiment.c_str(), r.xi_omega, r.xi_phi,
                static_cast<unsigned long long>(r.epochs), r.tau_min, r.gamma_e_te,
                r.gamma_r_tr, r.f_avg.c_str(), r.f_avg_thermal.c_str(), r.delta_f.c_str());

  const bool any_piecewise =
      std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.piecewise; });
  if (any_piecewise && !piecewise_out_csv.empty()) {
    std::ofstream out(piecewise_out_csv);
    if (!out) throw std::runtime_error("cannot open " + piecewise_out_csv + " for writing");
    out << "protocol,epochs,xi_omega,xi_phi,tau_min_us,t_sq_us,f_t,eps_control,f_avg\n";
    for (const auto& r : rows) {
      if (!r.piecewise) continue;
      std::snprintf(buf, sizeof(buf), "%s,%llu,%g,%g,%.17g,%.17g,%s,%.17g,%s\n",
                    r.method.c_str(), static_cast<unsigned long long>(r.epochs), r.xi_omega,
                    r.xi_phi, r.tau_min, r.t_sq, r.f_t.c_str(), r.eps_control,
                    r.f_avg.c_str());
      out << buf;
    }
  }
  return 0;
}

inline int cmd_export_pulse(const std::string& run_dir, const std::string& out_path) {
  const Json manifest = read_json(run_dir + "/manifest.json");
  const std::string pulse_path = run_dir + "/best_pulse.csv";
  if (!std::filesystem::exists(pulse_path))
    throw ConfigError(run_dir + " has no best_pulse.csv (no episode improved on reset?)");
  const Json& grid =
      manifest.contains("piecewise") ? manifest.at("piecewise") : manifest.at("physics");
  const double dt =
      grid.at("t_total_us").get<double>() / grid.at("n_steps").get<double>();
  PulseSchedule s;
  try {
    s = PulseSchedule::read_csv(pulse_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  s.write_csv(out_path, dt);
  return 0;
}

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Rydberg CNOT pulse synthesis: training, evaluation and robustness sweeps"};
  app.require_subcommand(1);

  TrainCliOptions topt;
  auto* train = app.add_subcommand("train", "Train a policy from a config file");
  train->add_option("--config", topt.config_path, "key = value config file")->required();
  train->add_option("--out", topt.out_dir, "output directory (overrides config/environment)");
  train->add_option("--resume", topt.resume_path, "checkpoint to continue from");
  train->add_option("--epochs", topt.epochs_override, "override the config epoch target");
  train->add_option("--target-fidelity", topt.target_fidelity,
                    "stop once the best fidelity reaches this value");
  train->add_flag("--quiet", topt.quiet, "suppress progress output");

  std::string pulse_csv, config_path, out_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a pulse CSV and print metrics JSON");
  eval->add_option("--pulse", pulse_csv, "pulse CSV")->required();
  eval->add_option("--config", config_path, "config file for parameter overrides");
  eval->add_option("--out", out_path, "write metrics JSON here instead of stdout");

  std::vector<double> temps;
  std::string effect = "both";
  bool counter = false;
  int mc_shots = 0;
  std::uint64_t mc_seed = 0;
  std::string sweep_pulse, sweep_config, sweep_out;
  auto* sweep = app.add_subcommand("sweep-thermal", "Finite-temperature robustness sweep");
  sweep->add_option("--pulse", sweep_pulse, "pulse CSV")->required();
  sweep->add_option("--config", sweep_config, "config file for parameter overrides");
  sweep->add_option("--temps", temps, "temperatures in uK")->required()->delimiter(',');
  sweep->add_option("--effect", effect, "doppler, interaction or both");
  sweep->add_flag("--counter-propagating", counter,
                  "use the wavenumber sum in the Doppler shift");
  sweep->add_option("--mc-shots", mc_shots, "Monte Carlo shots (0 = rms evaluation)");
  sweep->add_option("--mc-seed", mc_seed, "Monte Carlo seed");
  sweep->add_option("--out", sweep_out, "write the sweep CSV here");

  std::vector<std::string> run_dirs;
  std::string report_out, report_piecewise_out;
  auto* report = app.add_subcommand("report", "Merge completed runs into a comparison table");
  report->add_option("dirs", run_dirs, "run directories")->required();
  report->add_option("--out", report_out, "write the merged CSV here");
  report->add_option("--piecewise-out", report_piecewise_out,
                     "write the piecewise-protocol CSV here");

  std::string export_run, export_out;
  auto* exp = app.add_subcommand("export-pulse", "Re-emit a run's best pulse CSV");
  exp->add_option("--run", export_run, "run directory")->required();
  exp->add_option("--out", export_out, "destination CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(topt);
    if (*eval) return cmd_eval(pulse_csv, config_path, out_path);
    if (*sweep)
      return cmd_sweep_thermal(sweep_pulse, sweep_config, temps, effect, counter, mc_shots,
                               mc_seed, sweep_out);
    if (*report) return cmd_report(run_dirs, report_out, report_piecewise_out);
    if (*exp) return cmd_export_pulse(export_run, export_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace rydgate

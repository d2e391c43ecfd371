#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rydgate/cli.hpp"

using namespace rydgate;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "rydgate_cli_test";
  fs::create_directories(d);
  return d;
}

std::string write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in, "test.cfg");
}

// Small, fast training setup shared by the end-to-end cases.
const char* kTinyPiecewiseCfg =
    "experiment = tiny\n"
    "mode = piecewise-nonadiabatic\n"
    "epochs = 4\n"
    "seed = 7\n"
    "physics.n_steps = 10\n"
    "physics.t_total_us = 0.05\n"
    "trpo.episodes_per_update = 2\n"
    "agent.hidden_layers = 12,6\n";

}  // namespace

TEST_CASE("config parsing resolves keys, units and defaults") {
  SECTION("minimal config keeps paper defaults elsewhere") {
    const RunConfig c = parse_string("mode = synchronous-iu\nepochs = 10\nseed = 1\n");
    CHECK(c.mode == RunMode::SynchronousIU);
    CHECK(c.epochs == 10);
    CHECK(c.trpo.seed == 1);
    CHECK(c.physics.delta == Catch::Approx(mhz_to_rad_us(7300.0)));
    CHECK(c.physics.omega_gl == Catch::Approx(mhz_to_rad_us(250.0)));
    CHECK(c.trpo.kl_bound == 0.01);
    CHECK(c.experiment == "run");
  }
  SECTION("frequencies are converted from /2pi units at the boundary") {
    const RunConfig c = parse_string(
        "physics.delta_mhz = 1000\n"
        "physics.gamma_r_khz = 2\n"
        "physics.trap_omega_khz = 50\n"
        "trpo.kl_bound = 0.02\n");
    CHECK(c.physics.delta == Catch::Approx(mhz_to_rad_us(1000.0)));
    CHECK(c.physics.gamma_r == Catch::Approx(khz_to_rad_us(2.0)));
    CHECK(c.physics.trap_omega == Catch::Approx(khz_to_rad_us(50.0)));
    CHECK(c.trpo.kl_bound == 0.02);
  }
  SECTION("comments, blank lines and spacing are tolerated") {
    const RunConfig c = parse_string(
        "# header comment\n"
        "\n"
        "  epochs   =  42   # trailing comment\n");
    CHECK(c.epochs == 42);
  }
  SECTION("unknown key names itself, the line and the nearest valid key") {
    try {
      parse_string("mode = synchronous-iu\nxi_omga = 0.1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("test.cfg:2") != std::string::npos);
      CHECK(msg.find("xi_omga") != std::string::npos);
      CHECK(msg.find("physics.xi_omega") != std::string::npos);
    }
  }
  SECTION("malformed lines and values carry line context") {
    CHECK_THROWS_WITH(parse_string("epochs 10\n"),
                      Catch::Matchers::ContainsSubstring("test.cfg:1"));
    CHECK_THROWS_WITH(parse_string("\nepochs = ten\n"),
                      Catch::Matchers::ContainsSubstring("test.cfg:2"));
    CHECK_THROWS_AS(parse_string("mode = diagonal\n"), ConfigError);
    CHECK_THROWS_AS(parse_string("epochs = -3\n"), ConfigError);
    CHECK_THROWS_AS(parse_string("epochs =\n"), ConfigError);
  }
  SECTION("semantic validation failures are config errors") {
    CHECK_THROWS_AS(parse_string("physics.xi_omega = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_string("agent.hidden_layers = 0\n"), ConfigError);
  }
  SECTION("piecewise settings use protocol defaults unless overridden") {
    const RunConfig a = parse_string("mode = piecewise-adiabatic-1\n");
    CHECK(a.piecewise().t_total == 3.0);
    CHECK(a.piecewise().xi_omega == 0.025);
    const RunConfig b =
        parse_string("mode = piecewise-adiabatic-1\nphysics.t_total_us = 1.5\n");
    CHECK(b.piecewise().t_total == 1.5);
    const RunConfig c = parse_string("mode = synchronous-iu\n");
    CHECK_THROWS_AS(c.piecewise(), std::logic_error);
  }
}

TEST_CASE("manifest records every parameter that affects results") {
  const RunConfig c = parse_string(kTinyPiecewiseCfg);
  const Json m = manifest_json(c, "/tmp/x");
  CHECK(m.at("engine_version").get<std::string>() == kEngineVersion);
  CHECK(m.at("mode") == "piecewise-nonadiabatic");
  CHECK(m.at("seed") == 7);
  for (const char* key :
       {"omega_gl_rad_per_us", "delta_rad_per_us", "v0_rad_per_us", "gamma_e_rad_per_us",
        "gamma_r_rad_per_us", "omega_c_max_rad_per_us", "omega_t_max_rad_per_us", "eta_e",
        "eta_r", "t_total_us", "n_steps", "xi_omega", "xi_phi", "r0_um",
        "trap_omega_rad_per_us", "mass_kg", "k1_rad_per_m", "k2_rad_per_m"})
    CHECK(m.at("physics").contains(key));
  for (const char* key :
       {"hidden_layers", "kl_bound", "gamma_disc", "gae_lambda", "episodes_per_update",
        "cg_iterations", "cg_damping", "line_search_steps", "line_search_shrink",
        "critic_epochs", "critic_step_size", "initial_sigma"})
    CHECK(m.at("agent").contains(key));
  CHECK(m.at("piecewise").at("n_steps") == 10);
  CHECK(m.at("piecewise").at("t_total_us") == 0.05);
}

TEST_CASE("fidelity strings carry six significant digits") {
  CHECK(fidelity_string(0.999123456) == "0.999123");
  CHECK(fidelity_string(0.5) == "0.5");
  CHECK(fidelity_string(1.0) == "1");
}

TEST_CASE("train command produces a complete, byte-identical run directory") {
  const fs::path root = scratch_dir();
  const std::string cfg = write_file(root / "tiny.cfg", kTinyPiecewiseCfg);

  TrainCliOptions opt;
  opt.config_path = cfg;
  opt.quiet = true;
  opt.out_dir = (root / "run_a").string();
  fs::remove_all(opt.out_dir);
  REQUIRE(cmd_train(opt) == 0);
  opt.out_dir = (root / "run_b").string();
  fs::remove_all(opt.out_dir);
  REQUIRE(cmd_train(opt) == 0);

  for (const char* name : {"manifest.json", "metrics.json", "train_log.csv",
                           "best_pulse.csv", "checkpoint_final.bin"})
    CHECK(fs::exists(root / "run_a" / name));

  SECTION("identical config and seed give byte-identical artifacts") {
    CHECK(slurp(root / "run_a/train_log.csv") == slurp(root / "run_b/train_log.csv"));
    CHECK(slurp(root / "run_a/best_pulse.csv") == slurp(root / "run_b/best_pulse.csv"));
  }
  SECTION("log holds one row per epoch plus the header") {
    std::istringstream log(slurp(root / "run_a/train_log.csv"));
    int lines = 0;
    std::string line;
    while (std::getline(log, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 5);
  }
  SECTION("metrics JSON reports string fidelities and the replayed evaluation") {
    const Json m = read_json((root / "run_a/metrics.json").string());
    CHECK(m.at("epochs_done") == 4);
    CHECK(m.at("best_fidelity").is_string());
    REQUIRE(m.contains("eval"));
    CHECK(m.at("eval").contains("t_sq_us"));
    CHECK(m.at("eval").contains("eps_control"));
  }
  SECTION("report merges runs and rejects directories without a manifest") {
    const std::string out = (root / "table.csv").string();
    const std::string pw = (root / "piecewise.csv").string();
    REQUIRE(cmd_report({(root / "run_a").string(), (root / "run_b").string()}, out, pw) == 0);
    std::istringstream table(slurp(out));
    std::string header;
    std::getline(table, header);
    CHECK(header ==
          "method,case,xi_omega,xi_phi,epochs,tau_min_us,gamma_e_te,gamma_r_tr,"
          "f_avg,f_avg_thermal,delta_f");
    std::istringstream ptable(slurp(pw));
    std::getline(ptable, header);
    CHECK(header == "protocol,epochs,xi_omega,xi_phi,tau_min_us,t_sq_us,f_t,eps_control,f_avg");
    fs::create_directories(root / "not_a_run");
    CHECK_THROWS_AS(cmd_report({(root / "not_a_run").string()}, "", ""), ConfigError);
  }
  SECTION("export-pulse round-trips the best pulse byte-identically") {
    const std::string out = (root / "exported.csv").string();
    REQUIRE(cmd_export_pulse((root / "run_a").string(), out) == 0);
    CHECK(slurp(out) == slurp(root / "run_a/best_pulse.csv"));
  }
  SECTION("resume continues an interrupted run to the same log bytes") {
    TrainCliOptions half = {};
    half.config_path = cfg;
    half.quiet = true;
    half.out_dir = (root / "run_c").string();
    half.epochs_override = 2;
    fs::remove_all(half.out_dir);
    REQUIRE(cmd_train(half) == 0);
    half.epochs_override = 4;
    half.resume_path = (root / "run_c/checkpoint_final.bin").string();
    REQUIRE(cmd_train(half) == 0);
    CHECK(slurp(root / "run_c/train_log.csv") == slurp(root / "run_a/train_log.csv"));
  }
}

TEST_CASE("eval handles zero pulses, grid mismatches and malformed rows") {
  const fs::path root = scratch_dir();
  RunConfig cfg = parse_string("mode = synchronous-iu\nphysics.n_steps = 20\n");

  SECTION("zero pulse is no gate: F_avg 0.5 at a zero cutoff") {
    const PulseSchedule zero(20);
    const Json e = sync_eval_json(zero, cfg);
    CHECK(e.at("tau_min_us") == 0.0);
    CHECK(e.at("f_avg_at_tau_min").get<std::string>() == "0.5");
    CHECK(std::stod(e.at("f_avg_at_t_total").get<std::string>()) ==
          Catch::Approx(0.5).margin(1e-9));
  }
  SECTION("pulse on the wrong grid is a named config error") {
    const PulseSchedule wrong(19);
    wrong.write_csv((root / "wrong.csv").string(), cfg.physics.dt());
    const PulseSchedule back = PulseSchedule::read_csv((root / "wrong.csv").string());
    CHECK_THROWS_WITH(eval_json(back, cfg), Catch::Matchers::ContainsSubstring("19"));
  }
  SECTION("malformed CSV row reports its row number") {
    const std::string bad = write_file(root / "bad.csv",
                                       "step,t_us,omega_c,omega_t,phi_c,phi_t\n"
                                       "0,0,0,0,0,0\n"
                                       "1,0.004,oops,0,0,0\n");
    CHECK_THROWS_WITH(PulseSchedule::read_csv(bad),
                      Catch::Matchers::ContainsSubstring("row 3"));
  }
}

TEST_CASE("thermal sweep command writes the robustness CSV") {
  const fs::path root = scratch_dir();
  RunConfig cfg = parse_string("mode = synchronous-iu\nphysics.n_steps = 8\n");
  const std::string cfg_path = write_file(root / "sweep.cfg",
                                          "mode = synchronous-iu\nphysics.n_steps = 8\n");
  PulseSchedule s(8);
  for (int i = 0; i < 8; ++i) s.omega_t[i] = 0.3 * cfg.physics.omega_t_max;
  const std::string pulse = (root / "sweep_pulse.csv").string();
  s.write_csv(pulse, cfg.physics.dt());

  const std::string out = (root / "thermal.csv").string();
  REQUIRE(cmd_sweep_thermal(pulse, cfg_path, {0.0, 5.0}, "doppler", false, 0, 0, out) == 0);
  std::istringstream table(slurp(out));
  std::string header;
  std::getline(table, header);
  CHECK(header == "T_uK,effect,delta_D_rad_per_us,V_prime_rad_per_us,f_avg,delta_f");
  CHECK_THROWS_AS(cmd_sweep_thermal(pulse, cfg_path, {1.0}, "quantum", false, 0, 0, ""),
                  ConfigError);
}

TEST_CASE("cli entry point maps failures to documented exit codes") {
  const fs::path root = scratch_dir();
  auto run = [](std::vector<std::string> args) {
    std::vector<const char*> argv{"rydgate"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(run({"no-such-command"}) == 2);
  CHECK(run({"eval", "--pulse", (root / "does_not_exist.csv").string()}) == 2);
  const std::string bad_cfg = write_file(root / "bad.cfg", "xi_omga = 0.1\n");
  CHECK(run({"train", "--config", bad_cfg}) == 2);

  const PulseSchedule zero(100);
  const std::string pulse = (root / "zero100.csv").string();
  zero.write_csv(pulse, 0.004);
  const std::string out = (root / "zero_metrics.json").string();
  CHECK(run({"eval", "--pulse", pulse, "--out", out}) == 0);
  CHECK(read_json(out).at("f_avg_at_tau_min").get<std::string>() == "0.5");
}

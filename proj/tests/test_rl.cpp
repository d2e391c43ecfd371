#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rydgate/checkpoint.hpp"
#include "rydgate/trainer.hpp"

using namespace rydgate;

namespace {

GaussianPolicy make_small_policy(std::uint64_t seed, double sigma = 0.3) {
  Mlp net({3, 5, 4, 3, 2});
  std::mt19937_64 rng(seed);
  net.init_orthogonal(rng, 1.0);
  return GaussianPolicy(std::move(net), sigma);
}

RMat random_rows(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss;
  RMat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * gauss(rng);
  return m;
}

/// Single-state bandit with a quadratic reward peaking inside the action box.
class ToyEnv : public EnvBase {
 public:
  Eigen::VectorXd reset() override { return Eigen::VectorXd::Zero(1); }
  std::tuple<Eigen::VectorXd, double, bool> step(const Eigen::VectorXd& a) override {
    last_reward_ = 1.0 - (a(0) - 0.6) * (a(0) - 0.6);
    return {Eigen::VectorXd::Zero(1), last_reward_, true};
  }
  int obs_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int horizon() const override { return 1; }
  const PulseSchedule& schedule() const override { return sched_; }
  double grid_dt() const override { return 0.0; }
  double tau_min() const override { return 0.0; }
  double fidelity_at_cutoff() const override { return last_reward_; }

 private:
  PulseSchedule sched_;
  double last_reward_ = 0.0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("policy forward basics") {
  Mlp zero_net({3, 5, 2});
  GaussianPolicy zero_pi(zero_net, 0.3);
  CHECK(zero_pi.mean(RVec::Zero(3)) == RVec::Zero(2));
  CHECK(zero_pi.mean(RVec::Ones(3)) == RVec::Zero(2));

  const GaussianPolicy pi = make_small_policy(1);
  std::mt19937_64 rng(2);
  const RVec obs = random_rows(1, 3, rng).row(0).transpose();
  const RVec m1 = pi.mean(obs);
  const RVec m2 = pi.mean(obs);
  CHECK(m1 == m2);
  CHECK(m1.allFinite());
  CHECK_THROWS_AS(pi.mean(RVec::Zero(4)), std::invalid_argument);
}

TEST_CASE("action sampling") {
  SECTION("sigma to zero limit is deterministic at the mean") {
    GaussianPolicy pi(make_small_policy(3).net(), 1e-14);
    std::mt19937_64 rng(4);
    const RVec obs = RVec::Ones(3);
    auto [raw, lp] = pi.sample(obs, rng);
    CHECK((raw - pi.mean(obs)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("empirical mean matches mu") {
    GaussianPolicy pi(Mlp({3, 5, 2}), 1.0);  // zero net: mu = 0, sigma = 1
    std::mt19937_64 rng(5);
    RVec acc = RVec::Zero(2);
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += pi.sample(RVec::Zero(3), rng).first;
    CHECK((acc / n).cwiseAbs().maxCoeff() < 0.02);
  }
  SECTION("same rng seed gives identical samples") {
    const GaussianPolicy pi = make_small_policy(6);
    std::mt19937_64 r1(9), r2(9);
    const RVec obs = RVec::Ones(3);
    auto [a1, l1] = pi.sample(obs, r1);
    auto [a2, l2] = pi.sample(obs, r2);
    CHECK(a1 == a2);
    CHECK(l1 == l2);
  }
  SECTION("log_prob matches the Gaussian density") {
    const GaussianPolicy pi = make_small_policy(7, 0.5);
    const RVec obs = RVec::Zero(3);
    const RVec mu = pi.mean(obs);
    const double lp = pi.log_prob_obs(obs, mu);
    CHECK(lp == Catch::Approx(-2.0 * std::log(0.5) - std::log(2.0 * M_PI)).epsilon(1e-12));
  }
}

TEST_CASE("gae oracles") {
  auto make_traj = [](const RVec& rewards, const RVec& values) {
    Trajectory t;
    const int n = static_cast<int>(rewards.size());
    t.obs = RMat::Zero(n, 1);
    t.raw_actions = RMat::Zero(n, 1);
    t.log_probs = RVec::Zero(n);
    t.rewards = rewards;
    t.values = values;
    return t;
  };

  SECTION("all zero rewards and values give zero advantages") {
    const auto g = compute_gae({make_traj(RVec::Zero(4), RVec::Zero(4))}, 0.99, 0.97);
    CHECK(g.advantages == RVec::Zero(4));
    CHECK(g.returns == RVec::Zero(4));
  }
  SECTION("gamma = lambda = 1 with zero values telescopes to reward-to-go") {
    RVec r(3);
    r << 1.0, 2.0, 4.0;
    const auto g = compute_gae({make_traj(r, RVec::Zero(3))}, 1.0, 1.0);
    RVec raw(3);
    raw << 7.0, 6.0, 4.0;  // sums of remaining rewards
    const double mean = raw.mean();
    const double sd = std::sqrt((raw.array() - mean).square().sum() / 3.0);
    CHECK(g.advantages.isApprox((raw.array() - mean).matrix() / sd, 1e-12));
    CHECK(g.returns.isApprox(raw, 1e-12));
  }
  SECTION("exact values on a constant-reward mdp give zero advantages") {
    const double gamma = 0.9;
    RVec v(3);
    v << 1.0 + gamma + gamma * gamma, 1.0 + gamma, 1.0;  // Bellman-exact
    const auto g = compute_gae({make_traj(RVec::Ones(3), v)}, gamma, 0.95);
    CHECK(g.advantages.cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("empty batch rejected") {
    CHECK_THROWS_AS(compute_gae({}, 0.99, 0.97), std::invalid_argument);
  }
}

TEST_CASE("policy gradient matches finite differences") {
  GaussianPolicy pi = make_small_policy(11);
  std::mt19937_64 rng(12);
  const int m = 6;
  const RMat obs = random_rows(m, 3, rng);
  const RMat acts = random_rows(m, 2, rng, 0.5);
  const RVec coeff = random_rows(m, 1, rng).col(0);

  const RVec analytic = pi.weighted_logp_gradient(obs, acts, coeff);

  auto objective = [&](const RVec& theta) {
    GaussianPolicy q = pi;
    q.unflatten(theta);
    double s = 0.0;
    for (int r = 0; r < m; ++r)
      s += coeff(r) * q.log_prob_obs(obs.row(r).transpose(), acts.row(r).transpose());
    return s;
  };
  const RVec theta0 = pi.flatten();
  const double h = 1e-6;
  RVec numeric(theta0.size());
  for (int i = 0; i < theta0.size(); ++i) {
    RVec tp = theta0, tm = theta0;
    tp(i) += h;
    tm(i) -= h;
    numeric(i) = (objective(tp) - objective(tm)) / (2.0 * h);
  }
  CHECK((analytic - numeric).norm() / numeric.norm() < 1e-4);
}

TEST_CASE("fisher vector product matches finite differences") {
  GaussianPolicy pi = make_small_policy(13);
  std::mt19937_64 rng(14);
  const int m = 5;
  const RMat obs = random_rows(m, 3, rng);
  const RVec theta0 = pi.flatten();
  RMat old_means(m, 2);
  for (int r = 0; r < m; ++r)
    old_means.row(r) = pi.mean(obs.row(r).transpose()).transpose();
  const RVec old_log_std = pi.log_std();

  auto kl_at = [&](const RVec& theta) {
    GaussianPolicy q = pi;
    q.unflatten(theta);
    return q.mean_kl_from(obs, old_means, old_log_std);
  };

  RVec v = random_rows(theta0.size(), 1, rng).col(0);
  v.normalize();
  const RVec fv = pi.fisher_vector_product(obs, v, 0.0);

  SECTION("quadratic form") {
    const double eps = 1e-4;
    const double quad = 2.0 * kl_at(theta0 + eps * v) / (eps * eps);
    CHECK(quad == Catch::Approx(v.dot(fv)).epsilon(1e-3));
  }
  SECTION("full vector by second differences") {
    const double eps = 1e-4, h = 1e-4;
    RVec numeric(theta0.size());
    for (int i = 0; i < theta0.size(); ++i) {
      RVec e = RVec::Zero(theta0.size());
      e(i) = 1.0;
      numeric(i) = (kl_at(theta0 + eps * v + h * e) - kl_at(theta0 + eps * v - h * e) -
                    kl_at(theta0 - eps * v + h * e) + kl_at(theta0 - eps * v - h * e)) /
                   (4.0 * eps * h);
    }
    CHECK((fv - numeric).norm() / numeric.norm() < 1e-4);
  }
  SECTION("damping adds a multiple of the identity") {
    const RVec fv_damped = pi.fisher_vector_product(obs, v, 0.25);
    CHECK((fv_damped - fv - 0.25 * v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

namespace {

Trajectory toy_rollout(ToyEnv& env, const GaussianPolicy& pi, const Mlp& critic,
                       std::mt19937_64& rng) {
  Trajectory t;
  t.obs = RMat::Zero(1, 1);
  t.raw_actions.resize(1, 1);
  t.log_probs.resize(1);
  t.rewards.resize(1);
  t.values.resize(1);
  const RVec obs = env.reset();
  auto [raw, lp] = pi.sample(obs, rng);
  t.raw_actions(0, 0) = raw(0);
  t.log_probs(0) = lp;
  auto [next_obs, reward, done] = env.step(GaussianPolicy::clip_action(raw));
  t.rewards(0) = reward;
  t.values(0) = critic.forward(obs)(0);
  return t;
}

}  // namespace

TEST_CASE("trpo update edge cases and guarantees") {
  std::mt19937_64 init_rng(21);
  Mlp actor_net({1, 8, 1});
  actor_net.init_orthogonal(init_rng, 0.01);
  GaussianPolicy actor(actor_net, 0.3);
  Mlp critic({1, 8, 1});
  critic.init_orthogonal(init_rng, 1.0);
  TrpoConfig cfg;
  cfg.episodes_per_update = 8;

  ToyEnv env;
  std::mt19937_64 rng(22);
  auto collect = [&](int n) {
    std::vector<Trajectory> batch;
    for (int i = 0; i < n; ++i) batch.push_back(toy_rollout(env, actor, critic, rng));
    return batch;
  };

  SECTION("all-zero advantages leave the policy unchanged") {
    auto batch = collect(8);
    for (auto& t : batch) {
      t.rewards.setZero();
      t.values.setZero();
    }
    Mlp critic_zero({1, 8, 1});  // zero critic keeps the returns target at 0
    const RVec before = actor.flatten();
    const TrpoDiagnostics d = trpo_update(actor, critic_zero, batch, cfg);
    CHECK(actor.flatten() == before);
    CHECK_FALSE(d.accepted);
    CHECK(d.mean_kl == 0.0);
  }
  SECTION("kl_bound = 0 rejects every step") {
    TrpoConfig zero_cfg = cfg;
    zero_cfg.kl_bound = 0.0;
    const RVec before = actor.flatten();
    const TrpoDiagnostics d = trpo_update(actor, critic, collect(8), zero_cfg);
    CHECK(actor.flatten() == before);
    CHECK_FALSE(d.accepted);
  }
  SECTION("accepted updates respect the kl bound and improve the surrogate") {
    for (int u = 0; u < 10; ++u) {
      const TrpoDiagnostics d = trpo_update(actor, critic, collect(8), cfg);
      if (d.accepted) {
        CHECK(d.mean_kl <= cfg.kl_bound + 1e-6);
        CHECK(d.surrogate_improvement > 0.0);
      }
      CHECK(d.critic_loss_after <= d.critic_loss_before + 1e-12);
    }
  }
  SECTION("empty batch rejected") {
    CHECK_THROWS_AS(trpo_update(actor, critic, {}, cfg), std::invalid_argument);
  }
}

TEST_CASE("toy mdp convergence") {
  TrpoConfig cfg;
  cfg.episodes_per_update = 20;
  cfg.seed = 31;
  TrainerOptions opt;
  opt.hidden_layers = {8, 8};
  Trainer tr([] { return std::make_unique<ToyEnv>(); }, cfg, opt);

  std::vector<double> mean_at_update;
  tr.run(1000, [&](const EpochStats& st) {
    if (st.epoch % cfg.episodes_per_update == 0) {
      CHECK((st.accepted == 0 || st.kl <= cfg.kl_bound + 1e-6));
      mean_at_update.push_back(tr.actor().mean(RVec::Zero(1))(0));
    }
  });
  REQUIRE(mean_at_update.size() == 50);
  CHECK(std::abs(mean_at_update.back() - 0.6) < 0.1);
  // distance to the optimum shrinks across coarse milestones
  auto dist = [](double m) { return std::abs(m - 0.6); };
  CHECK(dist(mean_at_update[49]) < dist(mean_at_update[0]));
  CHECK(dist(mean_at_update[24]) < dist(mean_at_update[0]));
}

TEST_CASE("checkpoint round trip and versioning") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rydgate_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Checkpoint ck;
  ck.config.seed = 99;
  ck.config.kl_bound = 0.005;
  std::mt19937_64 rng(41);
  Mlp actor_net({3, 5, 2});
  actor_net.init_orthogonal(rng, 0.01);
  ck.actor = GaussianPolicy(actor_net, 0.3);
  ck.critic = Mlp({3, 5, 1});
  ck.critic.init_orthogonal(rng, 1.0);
  ck.episodes_done = 123;
  ck.best_fidelity = 0.75;
  ck.best_tau_min = 0.2;

  const std::string path = (dir / "ck.bin").string();
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.actor.flatten() == ck.actor.flatten());
  CHECK(back.critic.flatten() == ck.critic.flatten());
  CHECK(back.episodes_done == 123);
  CHECK(back.best_fidelity == 0.75);
  CHECK(back.config.kl_bound == 0.005);
  CHECK(back.config.seed == 99);

  SECTION("wrong magic is rejected") {
    const std::string bad = (dir / "bad.bin").string();
    std::ofstream(bad, std::ios::binary) << "NOTACKPTxxxxxxxxxxxx";
    CHECK_THROWS_WITH(load_checkpoint(bad), Catch::Matchers::ContainsSubstring("not a checkpoint"));
  }
  SECTION("wrong version is rejected") {
    auto bytes = slurp(path);
    bytes[8] = 9;  // version field
    const std::string bad = (dir / "badver.bin").string();
    std::ofstream(bad, std::ios::binary) << bytes;
    CHECK_THROWS_WITH(load_checkpoint(bad), Catch::Matchers::ContainsSubstring("version"));
  }
}

TEST_CASE("training is reproducible and resumable") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "rydgate_trainer_test";
  fs::remove_all(root);

  TrpoConfig cfg;
  cfg.episodes_per_update = 10;
  cfg.seed = 77;
  TrainerOptions opt_a;
  opt_a.hidden_layers = {8, 8};
  opt_a.out_dir = (root / "a").string();

  SECTION("zero epochs yields an initialized checkpoint and empty log") {
    Trainer tr([] { return std::make_unique<ToyEnv>(); }, cfg, opt_a);
    tr.run(0);
    CHECK(fs::exists(root / "a" / "checkpoint_final.bin"));
    CHECK(slurp((root / "a" / "train_log.csv").string()) ==
          "epoch,mean_reward,best_f_avg,tau_min,kl,accepted\n");
    const Checkpoint ck = load_checkpoint((root / "a" / "checkpoint_final.bin").string());
    CHECK(ck.episodes_done == 0);
  }

  SECTION("uninterrupted and resumed runs produce identical logs") {
    Trainer full([] { return std::make_unique<ToyEnv>(); }, cfg, opt_a);
    full.run(60);

    TrainerOptions opt_b = opt_a;
    opt_b.out_dir = (root / "b").string();
    {
      Trainer first([] { return std::make_unique<ToyEnv>(); }, cfg, opt_b);
      first.run(20);
    }
    {
      Checkpoint ck = load_checkpoint((root / "b" / "checkpoint_final.bin").string());
      REQUIRE(ck.episodes_done == 20);
      Trainer resumed([] { return std::make_unique<ToyEnv>(); }, std::move(ck), opt_b);
      resumed.run(60);
    }
    CHECK(slurp((root / "a" / "train_log.csv").string()) ==
          slurp((root / "b" / "train_log.csv").string()));

    Trainer again([] { return std::make_unique<ToyEnv>(); }, cfg,
                  [&] {
                    TrainerOptions o = opt_a;
                    o.out_dir = (root / "c").string();
                    return o;
                  }());
    again.run(60);
    CHECK(slurp((root / "a" / "train_log.csv").string()) ==
          slurp((root / "c" / "train_log.csv").string()));
  }
}

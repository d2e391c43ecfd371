#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <utility>

#include "rydgate/checkpoint.hpp"
#include "rydgate/env_base.hpp"
#include "rydgate/trpo.hpp"

namespace rydgate {

struct TrainerOptions {
  std::vector<int> hidden_layers = {156, 48, 16};
  int checkpoint_interval = 1000;  // epochs; rounded up to a whole update cycle
  std::string out_dir;             // empty disables file output
};

struct EpochStats {
  int epoch = 0;
  double episode_reward = 0.0;
  double best_fidelity = 0.0;
  double tau_min = 0.0;
  double kl = 0.0;
  int accepted = 0;
  int discarded = 0;
};

/// Orchestrates episodic rollouts and trust-region updates. One epoch is one
/// collected episode; the policy is updated every episodes_per_update epochs.
/// Episode rng streams derive from (seed, episode index), so training is fully
/// reproducible and resumable from a checkpoint.
class Trainer {
 public:
  using EnvFactory = std::function<std::unique_ptr<EnvBase>()>;
  using Callback = std::function<void(const EpochStats&)>;

  Trainer(EnvFactory factory, TrpoConfig cfg, TrainerOptions opt = {})
      : factory_(std::move(factory)), opt_(std::move(opt)) {
    cfg.validate();
    env_ = factory_();
    ck_.config = cfg;
    std::mt19937_64 init_rng(cfg.seed);
    std::vector<int> actor_sizes{env_->obs_dim()};
    for (int h : opt_.hidden_layers) actor_sizes.push_back(h);
    actor_sizes.push_back(env_->action_dim());
    Mlp actor_net(actor_sizes);
    actor_net.init_orthogonal(init_rng, 0.01);
    ck_.actor = GaussianPolicy(std::move(actor_net), cfg.initial_sigma);
    std::vector<int> critic_sizes = actor_sizes;
    critic_sizes.back() = 1;
    ck_.critic = Mlp(critic_sizes);
    ck_.critic.init_orthogonal(init_rng, 1.0);
    prepare_output(false);
  }

  Trainer(EnvFactory factory, Checkpoint resumed, TrainerOptions opt = {})
      : factory_(std::move(factory)), opt_(std::move(opt)), ck_(std::move(resumed)) {
    env_ = factory_();
    prepare_output(true);
    // Episodes collected since the last update boundary were not persisted;
    // regenerate them silently so the next update sees the same batch.
    const auto epu = static_cast<std::uint64_t>(ck_.config.episodes_per_update);
    for (std::uint64_t e = ck_.episodes_done - ck_.episodes_done % epu;
         e < ck_.episodes_done; ++e)
      batch_.push_back(collect_episode(e));
  }

  const Checkpoint& state() const { return ck_; }
  const GaussianPolicy& actor() const { return ck_.actor; }
  const PulseSchedule& best_schedule() const { return best_schedule_; }
  double best_fidelity() const { return ck_.best_fidelity; }

  /// Run until the total episode count reaches target_epochs.
  void run(std::uint64_t target_epochs, const Callback& cb = nullptr) {
    while (ck_.episodes_done < target_epochs) {
      EpochStats st;
      st.epoch = static_cast<int>(ck_.episodes_done + 1);
      Trajectory traj;
      try {
        traj = collect_episode(ck_.episodes_done);
      } catch (const std::exception&) {
        ++st.discarded;
        ++ck_.episodes_done;
        log_epoch(st, cb);
        continue;
      }
      st.episode_reward = traj.rewards.sum();
      st.tau_min = traj.tau_min;
      if (traj.fidelity_at_cutoff > ck_.best_fidelity) {
        ck_.best_fidelity = traj.fidelity_at_cutoff;
        ck_.best_tau_min = traj.tau_min;
        best_schedule_ = env_->schedule();
        best_dt_ = env_->grid_dt();
        persist_best();
      }
      batch_.push_back(std::move(traj));
      ++ck_.episodes_done;

      if (batch_.size() == static_cast<size_t>(ck_.config.episodes_per_update)) {
        const TrpoDiagnostics d = trpo_update(ck_.actor, ck_.critic, batch_, ck_.config);
        st.kl = d.mean_kl;
        st.accepted = d.accepted ? 1 : 0;
        batch_.clear();
        maybe_checkpoint();
      }
      st.best_fidelity = ck_.best_fidelity;
      log_epoch(st, cb);
    }
    if (!opt_.out_dir.empty())
      save_checkpoint(ck_, opt_.out_dir + "/checkpoint_final.bin");
  }

 private:
  Trajectory collect_episode(std::uint64_t episode_index) {
    std::seed_seq seq{ck_.config.seed, episode_index};
    std::mt19937_64 rng(seq);
    const int n = env_->horizon();
    Trajectory t;
    t.obs.resize(n, env_->obs_dim());
    t.raw_actions.resize(n, env_->action_dim());
    t.log_probs.resize(n);
    t.rewards.resize(n);
    t.values.resize(n);
    RVec obs = env_->reset();
    for (int i = 0; i < n; ++i) {
      t.obs.row(i) = obs.transpose();
      auto [raw, lp] = ck_.actor.sample(obs, rng);
      t.raw_actions.row(i) = raw.transpose();
      t.log_probs(i) = lp;
      auto [next_obs, reward, done] = env_->step(GaussianPolicy::clip_action(raw));
      t.rewards(i) = reward;
      obs = next_obs;
      if (done && i + 1 != n) throw std::logic_error("environment ended early");
    }
    for (int i = 0; i < n; ++i)
      t.values(i) = ck_.critic.forward(t.obs.row(i).transpose())(0);
    t.terminal_fidelity = env_->fidelity_at_cutoff();
    t.fidelity_at_cutoff = env_->fidelity_at_cutoff();
    t.tau_min = env_->tau_min();
    return t;
  }

  void prepare_output(bool resuming) {
    if (opt_.out_dir.empty()) return;
    std::filesystem::create_directories(opt_.out_dir);
    log_.open(opt_.out_dir + "/train_log.csv", resuming ? std::ios::app : std::ios::out);
    if (!log_) throw std::runtime_error("cannot open training log in " + opt_.out_dir);
    if (!resuming) {
      log_ << "epoch,mean_reward,best_f_avg,tau_min,kl,accepted\n";
      log_.flush();
    }
  }

  void log_epoch(const EpochStats& st, const Callback& cb) {
    if (log_.is_open()) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d\n", st.epoch,
                    st.episode_reward, st.best_fidelity, st.tau_min, st.kl, st.accepted);
      log_ << buf;
      log_.flush();
    }
    if (cb) cb(st);
  }

  void maybe_checkpoint() {
    if (opt_.out_dir.empty()) return;
    const auto epu = static_cast<std::uint64_t>(ck_.config.episodes_per_update);
    const std::uint64_t interval =
        (static_cast<std::uint64_t>(opt_.checkpoint_interval) + epu - 1) / epu * epu;
    if (interval > 0 && ck_.episodes_done % interval == 0)
      save_checkpoint(ck_, opt_.out_dir + "/checkpoint_" +
                               std::to_string(ck_.episodes_done) + ".bin");
  }

  void persist_best() {
    if (opt_.out_dir.empty() || best_schedule_.size() == 0) return;
    best_schedule_.write_csv(opt_.out_dir + "/best_pulse.csv", best_dt_);
  }

  EnvFactory factory_;
  TrainerOptions opt_;
  Checkpoint ck_;
  std::unique_ptr<EnvBase> env_;
  std::vector<Trajectory> batch_;
  PulseSchedule best_schedule_;
  double best_dt_ = 0.0;
  std::ofstream log_;
};

}  // namespace rydgate

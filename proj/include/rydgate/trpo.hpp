#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include "rydgate/gae.hpp"
#include "rydgate/policy.hpp"

namespace rydgate {

struct TrpoConfig {
  double kl_bound = 0.01;
  double gamma_disc = 0.99;
  double gae_lambda = 0.97;
  int episodes_per_update = 20;
  int cg_iterations = 10;
  double cg_damping = 0.1;
  int line_search_steps = 10;
  double line_search_shrink = 0.8;
  int critic_epochs = 5;
  double critic_step_size = 1e-2;
  double initial_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(kl_bound >= 0.0)) throw std::invalid_argument("kl_bound must be >= 0");
    if (!(gamma_disc > 0.0 && gamma_disc <= 1.0))
      throw std::invalid_argument("gamma_disc must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
      throw std::invalid_argument("gae_lambda must be in [0, 1]");
    if (episodes_per_update < 1 || cg_iterations < 1 || line_search_steps < 1 ||
        critic_epochs < 0)
      throw std::invalid_argument("TrpoConfig counts must be positive");
    if (!(initial_sigma > 0.0)) throw std::invalid_argument("initial_sigma must be > 0");
  }
};

struct TrpoDiagnostics {
  bool accepted = false;
  int line_search_index = -1;
  double mean_kl = 0.0;
  double surrogate_improvement = 0.0;
  double grad_norm = 0.0;
  double critic_loss_before = 0.0;
  double critic_loss_after = 0.0;
  bool aborted_non_finite = false;
};

namespace detail {

inline RVec conjugate_gradient(const std::function<RVec(const RVec&)>& avp, const RVec& b,
                               int iterations, bool& ok) {
  RVec x = RVec::Zero(b.size());
  RVec r = b;
  RVec p = b;
  double rs = r.squaredNorm();
  ok = true;
  for (int it = 0; it < iterations && rs > 1e-20; ++it) {
    const RVec ap = avp(p);
    if (!ap.allFinite()) {
      ok = false;
      return x;
    }
    const double alpha = rs / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  if (!x.allFinite()) ok = false;
  return x;
}

inline double critic_loss(const Mlp& critic, const RMat& obs_rows, const RVec& targets) {
  double s = 0.0;
  for (int r = 0; r < obs_rows.rows(); ++r) {
    const double e = critic.forward(obs_rows.row(r).transpose())(0) - targets(r);
    s += e * e;
  }
  return s / obs_rows.rows();
}

/// Full-batch gradient descent with per-epoch backtracking so the loss never
/// increases on the fixed batch.
inline void critic_regress(Mlp& critic, const RMat& obs_rows, const RVec& targets,
                           int epochs, double step_size) {
  const int m = static_cast<int>(obs_rows.rows());
  for (int e = 0; e < epochs; ++e) {
    Mlp::Grads g = critic.zero_grads();
    double loss = 0.0;
    for (int r = 0; r < m; ++r) {
      Mlp::Cache c;
      const double err = critic.forward(obs_rows.row(r).transpose(), c)(0) - targets(r);
      RVec dy(1);
      dy(0) = 2.0 * err / m;
      critic.backward(c, dy, g);
      loss += err * err / m;
    }
    const RVec theta = critic.flatten();
    const RVec grad = Mlp::grads_flatten(g);
    double step = step_size;
    for (int tries = 0; tries < 30; ++tries) {
      critic.unflatten(theta - step * grad);
      if (critic_loss(critic, obs_rows, targets) <= loss) break;
      step *= 0.5;
      critic.unflatten(theta);
    }
  }
}

}  // namespace detail

/// One trust-region update: natural-gradient step via conjugate gradient on
/// Fisher-vector products, then a backtracking line search that only accepts
/// steps improving the surrogate while keeping mean KL within the bound.
/// The critic is regressed to discounted returns on the same batch.
inline TrpoDiagnostics trpo_update(GaussianPolicy& actor, Mlp& critic,
                                   const std::vector<Trajectory>& batch,
                                   const TrpoConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("trpo_update: empty batch");
  cfg.validate();

  int total = 0;
  for (const auto& t : batch) total += t.length();
  RMat obs(total, actor.obs_dim());
  RMat acts(total, actor.action_dim());
  RVec logp_old(total);
  int k = 0;
  for (const auto& t : batch) {
    obs.middleRows(k, t.length()) = t.obs;
    acts.middleRows(k, t.length()) = t.raw_actions;
    logp_old.segment(k, t.length()) = t.log_probs;
    k += t.length();
  }
  const GaeResult gae = compute_gae(batch, cfg.gamma_disc, cfg.gae_lambda);

  TrpoDiagnostics diag;
  diag.critic_loss_before = detail::critic_loss(critic, obs, gae.returns);

  const RVec g = actor.weighted_logp_gradient(obs, acts, gae.advantages / total);
  diag.grad_norm = g.norm();
  if (diag.grad_norm > 1e-12) {
    bool cg_ok = false;
    const RVec x = detail::conjugate_gradient(
        [&](const RVec& v) { return actor.fisher_vector_product(obs, v, cfg.cg_damping); },
        g, cfg.cg_iterations, cg_ok);
    if (!cg_ok) {
      diag.aborted_non_finite = true;
    } else {
      const double xfx =
          x.dot(actor.fisher_vector_product(obs, x, cfg.cg_damping));
      const RVec full_step =
          (xfx > 0.0) ? RVec(std::sqrt(2.0 * cfg.kl_bound / xfx) * x)
                      : RVec(RVec::Zero(x.size()));

      const RVec theta_old = actor.flatten();
      const RVec old_log_std = actor.log_std();
      RMat old_means(total, actor.action_dim());
      for (int r = 0; r < total; ++r)
        old_means.row(r) = actor.mean(obs.row(r).transpose()).transpose();

      auto surrogate = [&]() {
        double s = 0.0;
        for (int r = 0; r < total; ++r)
          s += std::exp(actor.log_prob_obs(obs.row(r).transpose(), acts.row(r).transpose()) -
                        logp_old(r)) *
               gae.advantages(r);
        return s / total;
      };
      const double surr_old = gae.advantages.mean();

      double scale = 1.0;
      for (int ls = 0; ls < cfg.line_search_steps; ++ls, scale *= cfg.line_search_shrink) {
        actor.unflatten(theta_old + scale * full_step);
        const double surr_new = surrogate();
        const double kl = actor.mean_kl_from(obs, old_means, old_log_std);
        if (std::isfinite(surr_new) && std::isfinite(kl) && kl <= cfg.kl_bound &&
            surr_new > surr_old) {
          diag.accepted = true;
          diag.line_search_index = ls;
          diag.mean_kl = kl;
          diag.surrogate_improvement = surr_new - surr_old;
          break;
        }
      }
      if (!diag.accepted) actor.unflatten(theta_old);
    }
  }

  detail::critic_regress(critic, obs, gae.returns, cfg.critic_epochs, cfg.critic_step_size);
  diag.critic_loss_after = detail::critic_loss(critic, obs, gae.returns);
  return diag;
}

}  // namespace rydgate

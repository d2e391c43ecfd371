#pragma once

#include <cmath>
#include <random>

#include "rydgate/mlp.hpp"

namespace rydgate {

/// Diagonal Gaussian policy: mean from the actor network, state-independent
/// learnable log standard deviations. Actions are clipped to [-1,1] after
/// sampling; log-probabilities always refer to the unclipped draw.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(Mlp actor, double initial_sigma)
      : net_(std::move(actor)),
        log_std_(RVec::Constant(net_.out_dim(), std::log(initial_sigma))) {}

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const RVec& log_std() const { return log_std_; }
  int obs_dim() const { return net_.in_dim(); }
  int action_dim() const { return net_.out_dim(); }

  RVec mean(const RVec& obs) const { return net_.forward(obs); }

  /// Sample a raw (unclipped) action and its log-probability.
  std::pair<RVec, double> sample(const RVec& obs, std::mt19937_64& rng) const {
    const RVec mu = mean(obs);
    std::normal_distribution<double> gauss;
    RVec raw(mu.size());
    for (int i = 0; i < mu.size(); ++i)
      raw(i) = mu(i) + std::exp(log_std_(i)) * gauss(rng);
    return {raw, log_prob(mu, raw)};
  }

  static RVec clip_action(const RVec& raw) { return raw.cwiseMax(-1.0).cwiseMin(1.0); }

  double log_prob(const RVec& mu, const RVec& raw_action) const {
    const RVec z = (raw_action - mu).array() / log_std_.array().exp();
    return -0.5 * z.squaredNorm() - log_std_.sum() -
           0.5 * mu.size() * std::log(2.0 * M_PI);
  }

  double log_prob_obs(const RVec& obs, const RVec& raw_action) const {
    return log_prob(mean(obs), raw_action);
  }

  /// Mean KL(old || this) over rows of obs, where the old policy is summarized
  /// by its per-row means and its log_std vector.
  double mean_kl_from(const RMat& obs_rows, const RMat& old_means,
                      const RVec& old_log_std) const {
    const RVec var_new = (2.0 * log_std_.array()).exp();
    const RVec var_old = (2.0 * old_log_std.array()).exp();
    double total = 0.0;
    for (int r = 0; r < obs_rows.rows(); ++r) {
      const RVec mu_new = mean(obs_rows.row(r).transpose());
      const RVec dmu = old_means.row(r).transpose() - mu_new;
      total += (log_std_ - old_log_std).sum() +
               0.5 * ((var_old.array() + dmu.array().square()) / var_new.array()).sum() -
               0.5 * mu_new.size();
    }
    return total / obs_rows.rows();
  }

  int n_params() const { return net_.n_params() + static_cast<int>(log_std_.size()); }

  RVec flatten() const {
    RVec out(n_params());
    out.head(net_.n_params()) = net_.flatten();
    out.tail(log_std_.size()) = log_std_;
    return out;
  }

  void unflatten(const RVec& v) {
    if (v.size() != n_params()) throw std::invalid_argument("policy parameter size mismatch");
    net_.unflatten(v.head(net_.n_params()));
    log_std_ = v.tail(log_std_.size());
  }

  /// Gradient of sum over rows of coeff(r) * log pi(raw_action_r | obs_r)
  /// with respect to all policy parameters.
  RVec weighted_logp_gradient(const RMat& obs_rows, const RMat& raw_actions,
                              const RVec& coeff) const {
    Mlp::Grads g = net_.zero_grads();
    RVec g_log_std = RVec::Zero(log_std_.size());
    const RVec inv_var = (-2.0 * log_std_.array()).exp();
    for (int r = 0; r < obs_rows.rows(); ++r) {
      Mlp::Cache c;
      const RVec mu = net_.forward(obs_rows.row(r).transpose(), c);
      const RVec diff = raw_actions.row(r).transpose() - mu;
      // d logp / d mu = (a - mu) / sigma^2 ; d logp / d log_sigma = z^2 - 1
      net_.backward(c, coeff(r) * (diff.array() * inv_var.array()).matrix(), g);
      g_log_std += coeff(r) * (diff.array().square() * inv_var.array() - 1.0).matrix();
    }
    RVec out(n_params());
    out.head(net_.n_params()) = Mlp::grads_flatten(g);
    out.tail(log_std_.size()) = g_log_std;
    return out;
  }

  /// Fisher-vector product for the mean KL at the current parameters:
  /// (1/M) sum_r J_r^T diag(1/sigma^2) J_r v for the network block, and 2 v for
  /// the log_std block (diagonal Fisher of a Gaussian in log sigma).
  RVec fisher_vector_product(const RMat& obs_rows, const RVec& v, double damping) const {
    const int np = net_.n_params();
    const Mlp::Grads dir = net_.grads_unflatten(v.head(np));
    const RVec inv_var = (-2.0 * log_std_.array()).exp();
    Mlp::Grads acc = net_.zero_grads();
    for (int r = 0; r < obs_rows.rows(); ++r) {
      Mlp::Cache c;
      net_.forward(obs_rows.row(r).transpose(), c);
      const RVec jv = net_.tangent(c, dir);
      net_.backward(c, (jv.array() * inv_var.array()).matrix(), acc);
    }
    RVec out(n_params());
    out.head(np) = Mlp::grads_flatten(acc) / obs_rows.rows();
    out.tail(log_std_.size()) = 2.0 * v.tail(log_std_.size());
    return out + damping * v;
  }

 private:
  Mlp net_;
  RVec log_std_;
};

}  // namespace rydgate

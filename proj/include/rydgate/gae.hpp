#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rydgate {

struct Trajectory {
  Eigen::MatrixXd obs;          // N x obs_dim
  Eigen::MatrixXd raw_actions;  // N x action_dim
  Eigen::VectorXd log_probs;    // N
  Eigen::VectorXd rewards;      // N
  Eigen::VectorXd values;       // N
  double terminal_fidelity = 0.0;
  double fidelity_at_cutoff = 0.0;
  double tau_min = 0.0;

  int length() const { return static_cast<int>(rewards.size()); }

  void check() const {
    const int n = length();
    if (n == 0 || obs.rows() != n || raw_actions.rows() != n || log_probs.size() != n ||
        values.size() != n)
      throw std::invalid_argument("trajectory field lengths disagree");
    if (!rewards.allFinite()) throw std::invalid_argument("trajectory rewards not finite");
  }
};

struct GaeResult {
  Eigen::VectorXd advantages;  // normalized across the batch
  Eigen::VectorXd returns;     // discounted reward-to-go targets for the critic
};

/// Generalized advantage estimation over a batch of finite-horizon episodes
/// (terminal value 0). Advantages are normalized to zero mean, unit variance
/// across the whole batch.
inline GaeResult compute_gae(const std::vector<Trajectory>& batch, double gamma,
                             double lambda) {
  if (batch.empty()) throw std::invalid_argument("compute_gae: empty batch");
  int total = 0;
  for (const auto& t : batch) {
    t.check();
    total += t.length();
  }
  GaeResult out;
  out.advantages.resize(total);
  out.returns.resize(total);
  int k = 0;
  for (const auto& t : batch) {
    const int n = t.length();
    double adv = 0.0, ret = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      const double v_next = (i + 1 < n) ? t.values(i + 1) : 0.0;
      const double delta = t.rewards(i) + gamma * v_next - t.values(i);
      adv = delta + gamma * lambda * adv;
      ret = t.rewards(i) + gamma * ret;
      out.advantages(k + i) = adv;
      out.returns(k + i) = ret;
    }
    k += n;
  }
  const double mean = out.advantages.mean();
  const double sd = std::sqrt((out.advantages.array() - mean).square().sum() /
                              out.advantages.size());
  out.advantages = (out.advantages.array() - mean) / (sd > 1e-12 ? sd : 1.0);
  return out;
}

}  // namespace rydgate

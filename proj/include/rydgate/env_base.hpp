#pragma once

#include <Eigen/Dense>
#include <tuple>

#include "rydgate/pulse_schedule.hpp"

namespace rydgate {

/// Episodic environment interface shared by the synchronous two-atom setting
/// and the piecewise target-atom settings.
class EnvBase {
 public:
  virtual ~EnvBase() = default;
  virtual Eigen::VectorXd reset() = 0;
  /// Returns (observation, reward, done). Actions are clipped to [-1,1]^d inside.
  virtual std::tuple<Eigen::VectorXd, double, bool> step(const Eigen::VectorXd& action) = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual const PulseSchedule& schedule() const = 0;
  virtual double grid_dt() const = 0;
  virtual double tau_min() const = 0;
  /// Figure of merit recorded at the detected cutoff of the current episode.
  virtual double fidelity_at_cutoff() const = 0;
};

}  // namespace rydgate

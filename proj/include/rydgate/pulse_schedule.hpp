#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rydgate/physical_params.hpp"

namespace rydgate {

/// Wrap an angle to (-pi, pi].
inline double wrap_phase(double phi) {
  double w = std::remainder(phi, kTwoPi);
  if (w <= -M_PI) w += kTwoPi;
  return w;
}

/// Piecewise-constant control sequence on the N-step time grid. Values at
/// index i hold over [t_i, t_{i+1}).
struct PulseSchedule {
  std::vector<double> omega_c, omega_t, phi_c, phi_t;

  PulseSchedule() = default;
  explicit PulseSchedule(int n)
      : omega_c(n, 0.0), omega_t(n, 0.0), phi_c(n, 0.0), phi_t(n, 0.0) {}

  int size() const { return static_cast<int>(omega_c.size()); }

  void validate(const PhysicalParams& p) const {
    if (size() != p.n_steps)
      throw std::invalid_argument("schedule has " + std::to_string(size()) +
                                  " steps but grid expects " + std::to_string(p.n_steps));
    for (int i = 0; i < size(); ++i) {
      if (omega_c[i] < -1e-12 || omega_c[i] > p.omega_c_max * (1.0 + 1e-12))
        throw std::invalid_argument("omega_c out of range at step " + std::to_string(i));
      if (omega_t[i] < -1e-12 || omega_t[i] > p.omega_t_max * (1.0 + 1e-12))
        throw std::invalid_argument("omega_t out of range at step " + std::to_string(i));
    }
  }

  void write_csv(const std::string& path, double dt) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "step,t_us,omega_c,omega_t,phi_c,phi_t\n";
    char buf[256];
    for (int i = 0; i < size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                    i * dt, omega_c[i], omega_t[i], phi_c[i], phi_t[i]);
      out << buf;
    }
  }

  static PulseSchedule read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,t_us,omega_c", 0) != 0)
      throw std::runtime_error(path + ": missing pulse CSV header");
    PulseSchedule s;
    int row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string field;
      std::vector<double> vals;
      while (std::getline(ss, field, ',')) {
        try {
          vals.push_back(std::stod(field));
        } catch (const std::exception&) {
          throw std::runtime_error(path + ": malformed value in row " + std::to_string(row));
        }
      }
      if (vals.size() != 6)
        throw std::runtime_error(path + ": expected 6 fields in row " + std::to_string(row));
      s.omega_c.push_back(vals[2]);
      s.omega_t.push_back(vals[3]);
      s.phi_c.push_back(vals[4]);
      s.phi_t.push_back(vals[5]);
    }
    return s;
  }
};

}  // namespace rydgate

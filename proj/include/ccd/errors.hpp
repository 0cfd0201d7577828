#pragma once

#include <stdexcept>
#include <string>

namespace ccd {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularJacobian : std::runtime_error {
  double condition_estimate;
  explicit SingularJacobian(const std::string& msg, double cond = 0.0)
      : std::runtime_error(msg), condition_estimate(cond) {}
};

struct NoConvergence : std::runtime_error {
  double best_norm;
  explicit NoConvergence(const std::string& msg, double norm = 0.0)
      : std::runtime_error(msg), best_norm(norm) {}
};

struct LyapunovSingular : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotStabilizable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergedTrajectory : std::runtime_error {
  int step;
  explicit DivergedTrajectory(const std::string& msg, int step_index)
      : std::runtime_error(msg), step(step_index) {}
};

struct OptimizationAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ccd

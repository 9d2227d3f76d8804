#pragma once

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

namespace fbff::envs {

using Vector = Eigen::VectorXd;

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool terminal = false;   // absorbing: no bootstrap
  bool truncated = false;  // step cap
  bool done() const { return terminal || truncated; }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual Vector reset() = 0;
  virtual StepResult step(const Vector& action) = 0;

  virtual Eigen::Index observation_dim() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> observation_labels() const = 0;
  /// Action as applied by the plant (squashed), for trajectory dumps.
  virtual Vector applied_action(const Vector& action) const = 0;
  virtual int max_steps() const = 0;
};

}  // namespace fbff::envs

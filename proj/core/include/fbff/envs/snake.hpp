#pragma once

#include "fbff/envs/cpg.hpp"
#include "fbff/envs/environment.hpp"

namespace fbff::envs {

struct SnakeParams {
  int joints = 8;
  double link_length = 0.1;     // m, one more link than joints (head link)
  double drag_lateral = 20.0;   // resistive coefficients; only the ratio matters
  double drag_longitudinal = 1.0;
  double tracking_gain = 25.0;  // 1/s, joint rate = gain * k * (ref - angle)
  double field_length = 4.0;    // m along x
  double field_width = 2.0;     // m along y, centred on the start line
  double start_margin = 2.0;    // m of field behind the start pose
  int max_steps = 2000;
  bool exit_is_terminal = false;  // leaving the field truncates by default
  int substeps = 10;
  double initial_stiffness = 0.5;
  CpgParams cpg = {8, 2.0, 10.0, 1.0, std::numbers::pi / 4.0, 0.02,
                   CouplingTopology::kDirectedChain};

  double x_min() const { return -start_margin; }
  double x_max() const { return field_length - start_margin; }
  double y_limit() const { return 0.5 * field_width; }
};

struct SnakeState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  Vector joint_angle;      // tracked angles
  Vector joint_rate;
  Vector stiffness;        // k in [0, 1]
  Vector torque;           // k * (reference - angle)
  Vector reference;        // CPG output
};

/// Head-frame velocity (vx, vy, omega of the head point, world frame) that
/// minimizes viscous dissipation of all links for given shape rates.
Eigen::Vector3d resistive_velocity(double heading, const Vector& joint_angle,
                                   const Vector& joint_rate, const SnakeParams& p);

/// Planar CPG-driven snake. Action: 8 unbounded values, k_i = sigmoid(a_i).
/// Observation layout (version 1): [theta_i, theta_dot_i, tau_i, k_i] for
/// i = 1..8, then head x, y. Reward -|y|.
class Snake : public Environment {
 public:
  static constexpr int kObservationVersion = 1;
  static constexpr Eigen::Index kXIndex = 32;
  static constexpr Eigen::Index kYIndex = 33;

  explicit Snake(SnakeParams params = {});

  Vector reset() override;
  StepResult step(const Vector& action) override;

  const SnakeState& state() const { return state_; }
  const Cpg& cpg() const { return cpg_; }
  const SnakeParams& params() const { return params_; }
  Vector observation() const;
  int steps() const { return steps_; }
  bool reached_goal() const { return state_.x > params_.x_max(); }

  Eigen::Index observation_dim() const override { return 4 * params_.joints + 2; }
  Eigen::Index action_dim() const override { return params_.joints; }
  std::string name() const override { return "snake"; }
  std::vector<std::string> observation_labels() const override;
  Vector applied_action(const Vector& action) const override;
  int max_steps() const override { return params_.max_steps; }

 private:
  SnakeParams params_;
  Cpg cpg_;
  SnakeState state_;
  int steps_ = 0;
};

}  // namespace fbff::envs

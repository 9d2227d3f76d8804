#include "fbff/envs/snake.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace fbff::envs {

Eigen::Vector3d resistive_velocity(double heading, const Vector& joint_angle,
                                   const Vector& joint_rate, const SnakeParams& p) {
  // Link 0 is the head; link j follows joint j. Links extend backwards from
  // the head point. Each link centre velocity is affine in (vx, vy, omega).
  const int links = static_cast<int>(joint_angle.size()) + 1;
  const double ell = p.link_length;
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();

  Eigen::Vector2d joint_pos = Eigen::Vector2d::Zero();  // relative to head point
  Eigen::Vector2d joint_vel = Eigen::Vector2d::Zero();  // shape-induced
  double angle = heading;
  double angle_rate = 0.0;
  for (int j = 0; j < links; ++j) {
    if (j > 0) {
      angle += joint_angle(j - 1);
      angle_rate += joint_rate(j - 1);
    }
    const Eigen::Vector2d t(std::cos(angle), std::sin(angle));
    const Eigen::Vector2d n(-t.y(), t.x());
    const Eigen::Vector2d centre = joint_pos - 0.5 * ell * t;
    const Eigen::Vector2d centre_vel = joint_vel - 0.5 * ell * angle_rate * n;

    Eigen::Matrix<double, 2, 3> a;
    a << 1.0, 0.0, -centre.y(),
         0.0, 1.0, centre.x();
    const Eigen::Matrix2d w =
        p.drag_lateral * n * n.transpose() + p.drag_longitudinal * t * t.transpose();
    normal += a.transpose() * w * a;
    rhs -= a.transpose() * w * centre_vel;

    joint_pos -= ell * t;
    joint_vel -= ell * angle_rate * n;
  }
  // Straight configurations leave the normal matrix nearly singular in omega.
  normal.diagonal().array() += 1e-6;
  return normal.ldlt().solve(rhs);
}

Snake::Snake(SnakeParams params) : params_(params), cpg_(params.cpg) {
  if (params_.cpg.oscillators != params_.joints)
    throw std::invalid_argument("snake: one CPG oscillator per joint");
  if (params_.substeps < 1) throw std::invalid_argument("snake: substeps must be >= 1");
  reset();
}

Vector Snake::reset() {
  cpg_.reset();
  const int n = params_.joints;
  state_ = SnakeState{};
  state_.joint_angle = Vector::Zero(n);
  state_.joint_rate = Vector::Zero(n);
  state_.stiffness = Vector::Constant(n, params_.initial_stiffness);
  state_.torque = Vector::Zero(n);
  state_.reference = Vector::Zero(n);
  steps_ = 0;
  return observation();
}

Vector Snake::applied_action(const Vector& action) const {
  return (1.0 / (1.0 + (-action.array()).exp())).matrix();
}

StepResult Snake::step(const Vector& action) {
  if (action.size() != params_.joints) throw std::invalid_argument("snake: action size mismatch");
  state_.stiffness = applied_action(action);
  state_.reference = cpg_.step();

  const double h = params_.cpg.dt / params_.substeps;
  const Vector gain = params_.tracking_gain * state_.stiffness;
  for (int sub = 0; sub < params_.substeps; ++sub) {
    state_.joint_rate =
        (gain.array() * (state_.reference - state_.joint_angle).array()).matrix();
    const Eigen::Vector3d v =
        resistive_velocity(state_.heading, state_.joint_angle, state_.joint_rate, params_);
    state_.x += h * v(0);
    state_.y += h * v(1);
    state_.heading += h * v(2);
    state_.joint_angle += h * state_.joint_rate;
  }
  state_.joint_rate =
      (gain.array() * (state_.reference - state_.joint_angle).array()).matrix();
  state_.torque =
      (state_.stiffness.array() * (state_.reference - state_.joint_angle).array()).matrix();
  ++steps_;

  StepResult r;
  r.observation = observation();
  r.reward = -std::abs(state_.y);
  const bool outside = state_.x > params_.x_max() || state_.x < params_.x_min() ||
                       std::abs(state_.y) > params_.y_limit();
  r.terminal = outside && params_.exit_is_terminal;
  r.truncated = !r.terminal && (outside || steps_ >= params_.max_steps);
  return r;
}

Vector Snake::observation() const {
  const int n = params_.joints;
  Vector obs(4 * n + 2);
  for (int i = 0; i < n; ++i) {
    obs(4 * i + 0) = state_.joint_angle(i);
    obs(4 * i + 1) = state_.joint_rate(i);
    obs(4 * i + 2) = state_.torque(i);
    obs(4 * i + 3) = state_.stiffness(i);
  }
  obs(4 * n) = state_.x;
  obs(4 * n + 1) = state_.y;
  return obs;
}

std::vector<std::string> Snake::observation_labels() const {
  std::vector<std::string> labels;
  for (int i = 1; i <= params_.joints; ++i) {
    const std::string s = std::to_string(i);
    labels.insert(labels.end(), {"theta_" + s, "theta_dot_" + s, "tau_" + s, "k_" + s});
  }
  labels.push_back("x");
  labels.push_back("y");
  return labels;
}

}  // namespace fbff::envs

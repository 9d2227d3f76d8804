#include "fbff/envs/cartpole.hpp"

#include <cmath>
#include <stdexcept>

namespace fbff::envs {

Vector CartPoleState::to_vector() const {
  Vector v(4);
  v << x, x_dot, theta, theta_dot;
  return v;
}

CartPoleState cartpole_derivative(const CartPoleState& s, double force,
                                  const CartPoleParams& p) {
  const double total = p.cart_mass + p.pole_mass;
  const double ml = p.pole_mass * p.half_length;
  const double sin_t = std::sin(s.theta);
  const double cos_t = std::cos(s.theta);
  const double temp = (force + ml * s.theta_dot * s.theta_dot * sin_t) / total;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total));
  const double x_acc = temp - ml * theta_acc * cos_t / total;
  return {s.x_dot, x_acc, s.theta_dot, theta_acc};
}

CartPoleState cartpole_integrate(const CartPoleState& s, double force, double dt,
                                 const CartPoleParams& p) {
  const CartPoleState d = cartpole_derivative(s, force, p);
  CartPoleState n = s;
  n.x_dot += dt * d.x_dot;
  n.x += dt * n.x_dot;
  n.theta_dot += dt * d.theta_dot;
  n.theta += dt * n.theta_dot;
  return n;
}

CartPole::CartPole(std::uint64_t seed, CartPoleParams params)
    : params_(params), rng_(seed) {}

Vector CartPole::reset() {
  std::uniform_real_distribution<double> u(-params_.init_range, params_.init_range);
  state_.x = u(rng_);
  state_.x_dot = u(rng_);
  state_.theta = u(rng_);
  state_.theta_dot = u(rng_);
  steps_ = 0;
  return state_.to_vector();
}

void CartPole::set_state(const CartPoleState& s) {
  state_ = s;
  steps_ = 0;
}

bool CartPole::out_of_bounds(const CartPoleState& s) const {
  return std::abs(s.theta) > params_.angle_limit || std::abs(s.x) > params_.position_limit;
}

Vector CartPole::applied_action(const Vector& action) const {
  return (params_.force_scale * action.array().tanh()).matrix();
}

StepResult CartPole::step(const Vector& action) {
  if (action.size() != 1) throw std::invalid_argument("cartpole expects a scalar action");
  const double force = params_.force_scale * std::tanh(action(0));
  state_ = cartpole_integrate(state_, force, params_.dt, params_);
  ++steps_;
  StepResult r;
  r.observation = state_.to_vector();
  r.terminal = out_of_bounds(state_);
  r.truncated = !r.terminal && steps_ >= params_.max_steps;
  r.reward = r.terminal ? 0.0 : 1.0;
  return r;
}

std::vector<std::string> CartPole::observation_labels() const {
  return {"x", "x_dot", "theta", "theta_dot"};
}

}  // namespace fbff::envs

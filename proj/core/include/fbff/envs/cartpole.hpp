#pragma once

#include "fbff/envs/environment.hpp"

#include <cstdint>
#include <random>

namespace fbff::envs {

struct CartPoleState {
  double x = 0.0;          // m
  double x_dot = 0.0;      // m/s
  double theta = 0.0;      // rad, 0 = upright
  double theta_dot = 0.0;  // rad/s

  Vector to_vector() const;
};

struct CartPoleParams {
  double gravity = 9.81;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force_scale = 10.0;
  double dt = 0.02;
  double angle_limit = 0.2;
  double position_limit = 2.4;
  int max_steps = 500;
  double init_range = 0.05;
};

/// Continuous time derivative of the classic cart-pole under force f.
CartPoleState cartpole_derivative(const CartPoleState& s, double force,
                                  const CartPoleParams& p);

/// One semi-implicit Euler step of length dt under force f (already squashed).
CartPoleState cartpole_integrate(const CartPoleState& s, double force, double dt,
                                 const CartPoleParams& p);

/// Cart-pole balancer. Action is an unbounded scalar mapped to
/// force_scale * tanh(a); reward 1 for every step that does not terminate.
class CartPole : public Environment {
 public:
  explicit CartPole(std::uint64_t seed, CartPoleParams params = {});

  Vector reset() override;
  StepResult step(const Vector& action) override;

  /// Sets the state directly; the step counter restarts.
  void set_state(const CartPoleState& s);
  const CartPoleState& state() const { return state_; }
  const CartPoleParams& params() const { return params_; }
  bool out_of_bounds(const CartPoleState& s) const;

  Eigen::Index observation_dim() const override { return 4; }
  Eigen::Index action_dim() const override { return 1; }
  std::string name() const override { return "cartpole"; }
  std::vector<std::string> observation_labels() const override;
  Vector applied_action(const Vector& action) const override;
  int max_steps() const override { return params_.max_steps; }

 private:
  CartPoleParams params_;
  std::mt19937_64 rng_;
  CartPoleState state_;
  int steps_ = 0;
};

}  // namespace fbff::envs

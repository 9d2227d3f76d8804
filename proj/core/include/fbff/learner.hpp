#pragma once

#include "fbff/networks.hpp"
#include "fbff/parameter.hpp"
#include "fbff/policy.hpp"
#include "fbff/world_model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbff {

struct Hyperparams {
  double gamma = 0.99;
  double learning_rate = 3e-4;
  double beta_t = 10.0;
  double beta_z = 1e-2;
  double beta_a = 1e-4;
  double eta = 1e-4;
  int latent_dim = 6;
  double rho = 0.5;
  double target_rate = 0.05;    // value target used for bootstrapping
  double behavior_rate = 1.0;   // policy copy that samples actions
  double trace_lambda = 0.95;
  double tau_opt = 1.0;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double nu_init = 5.0;
  bool nu_learnable = true;
  double scale_floor = 1e-6;
  int esn_layers = 3;
  int esn_units = 100;
  double esn_leak = 1.0;

  /// Throws std::invalid_argument when a value is out of its domain.
  void validate() const;
  std::map<std::string, std::string> to_map() const;
};

/// One environment step plus the agent's history features before it.
struct Transition {
  ad::Vector state;
  ad::Vector action;
  double reward = 0.0;
  ad::Vector next_state;
  bool terminal = false;
  double behavior_log_density = 0.0;
  ad::Vector state_history;
  ad::Vector action_history;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// delta = r + gamma v' (1 - done) - v, a plain number.
double td_error(double reward, double v_state, double v_next, bool terminal, double gamma);

/// g = tau (exp(delta / tau) - 1), exponent clamped at ad::kExpClamp.
double optimality_coeff(double delta, double tau);

/// -g (-L_model + ln pi).
ad::Tensor trajectory_loss(double g, const ad::Tensor& model_loss, const ad::Tensor& log_pi);
/// -g V.
ad::Tensor value_loss(double g, const ad::Tensor& value);

struct LossParts {
  ad::Tensor traj;
  ad::Tensor value;
  ad::Tensor model;
  double tau;
};
/// L_traj + L_value + tau L_model.
ad::Tensor total_loss(const LossParts& parts);

/// Adaptive-moment step with a non-decreasing raw second moment (AMSGrad);
/// bias corrections are applied when the step is taken.
class Optimizer {
 public:
  Optimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8);
  void step(const std::vector<Parameter*>& params);
  long steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

/// target <- (1 - rate) target + rate current, matched by parameter name.
void target_update(const ParameterSet& current, ParameterSet& target, double rate);
/// Same with a per-parameter rate looked up by name.
void target_update(const ParameterSet& current, ParameterSet& target,
                   const std::function<double(const std::string&)>& rate_of);

/// Accumulating traces e <- decay e + grad over a fixed parameter group.
class EligibilityTraces {
 public:
  explicit EligibilityTraces(std::vector<Parameter*> params);
  void reset();
  /// Folds the group's current grads in; the grads themselves are untouched.
  void accumulate(double decay);
  const ad::Matrix& trace(std::size_t i) const { return traces_[i]; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<ad::Matrix> traces_;
};

struct StepMetrics {
  double w = 0.0;
  double d = 0.0;
  double h_fb = 0.0;
  double h_ff = 0.0;
  double delta = 0.0;
  double g = 0.0;
  double value = 0.0;
  double log_pi = 0.0;
  double loss_traj = 0.0;
  double loss_value = 0.0;
  double loss_model = 0.0;
  double loss_model_recon = 0.0;
  double loss_model_kl = 0.0;
  double loss_model_ce = 0.0;
  double loss_all = 0.0;
};

struct ActionChoice {
  ad::Vector action;
  double log_density;
  bool from_fb;
  double w;
};

/// All networks, histories and optimizer state of one learning agent.
class Agent {
 public:
  Agent(Eigen::Index state_dim, Eigen::Index action_dim, const Hyperparams& hp,
        std::uint64_t seed);

  /// Zeroes both histories and all traces.
  void begin_episode();

  /// Samples from the behavior policy (target copy of the composed policy).
  ActionChoice act(const ad::Vector& observation);
  /// Deterministic median action from the current parameters.
  ActionChoice act_deterministic(const ad::Vector& observation, EvalMode mode) const;
  /// Current (not target) policy pair at the present histories.
  PolicyPair policy_pair(const ad::Vector& observation, EvalMode mode = EvalMode::kComposed) const;

  /// Feeds the observation to h^s and the executed action to h^a.
  void observe(const ad::Vector& observation, const ad::Vector& action);

  /// Transition using the current histories as the "before" snapshot.
  Transition make_transition(const ad::Vector& state, const ActionChoice& choice,
                             double reward, const ad::Vector& next_state,
                             bool terminal) const;

  /// One gradient step on the full loss. Throws NumericalError on NaN.
  StepMetrics train_step(const Transition& tr);

  double value(const ad::Vector& state) const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& target_params() { return target_params_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const EchoState& state_history() const { return hs_; }
  const EchoState& action_history() const { return ha_; }
  EchoState& state_history() { return hs_; }
  EchoState& action_history() { return ha_; }
  const PolicyHeads& policy() const { return policy_; }
  const WorldModel& model() const { return model_; }
  Eigen::Index state_dim() const { return state_dim_; }
  Eigen::Index action_dim() const { return action_dim_; }
  std::mt19937_64& rng() { return rng_; }

  /// Parameters whose gradients go through the eligibility traces.
  std::vector<Parameter*> traced_params();

 private:
  Eigen::Index state_dim_;
  Eigen::Index action_dim_;
  Hyperparams hp_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;

  ParameterSet params_;
  ParameterSet target_params_;
  EchoState hs_;
  EchoState ha_;
  PolicyHeads policy_;
  MlpHead value_;
  WorldModel model_;
  PolicyHeads target_policy_;
  MlpHead target_value_;

  Optimizer optimizer_;
  EligibilityTraces traces_;
  std::vector<Parameter*> all_params_;
};

}  // namespace fbff

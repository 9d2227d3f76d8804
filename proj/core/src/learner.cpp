#include "fbff/learner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fbff {
namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

DistHeadOptions head_options(const Hyperparams& hp) {
  DistHeadOptions o;
  o.nu_init = hp.nu_init;
  o.nu_learnable = hp.nu_learnable;
  o.scale_floor = hp.scale_floor;
  return o;
}

EchoStateOptions esn_options(const Hyperparams& hp, std::uint64_t seed) {
  EchoStateOptions o;
  o.layers = hp.esn_layers;
  o.units = hp.esn_units;
  o.spectral_radius = hp.rho;
  o.leak = hp.esn_leak;
  o.seed = seed;
  return o;
}

// Reservoir seeds are fixed offsets of the agent seed so checkpoints can
// rebuild them.
constexpr std::uint64_t kStateHistorySalt = 0x5eed0001;
constexpr std::uint64_t kActionHistorySalt = 0x5eed0002;

}  // namespace

void Hyperparams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("hyperparameter " + what); };
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must be in [0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(beta_t > 0.0)) fail("beta_t must be > 0");
  if (!(beta_z >= 0.0)) fail("beta_z must be >= 0");
  if (!(beta_a >= 0.0)) fail("beta_a must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0)) fail("eta must be in [0, 1]");
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (!(rho > 0.0)) fail("rho must be > 0");
  if (!(target_rate >= 0.0 && target_rate <= 1.0)) fail("target_rate must be in [0, 1]");
  if (!(behavior_rate >= 0.0 && behavior_rate <= 1.0)) fail("behavior_rate must be in [0, 1]");
  if (!(trace_lambda >= 0.0 && trace_lambda <= 1.0)) fail("trace_lambda must be in [0, 1]");
  if (!(tau_opt > 0.0)) fail("tau_opt must be > 0");
  if (!(nu_init > 1.001)) fail("nu_init must exceed 1.001");
  if (!(scale_floor > 0.0)) fail("scale_floor must be > 0");
  if (esn_layers < 1 || esn_units < 1) fail("echo state shape must be positive");
  if (!(esn_leak > 0.0 && esn_leak <= 1.0)) fail("esn_leak must be in (0, 1]");
}

std::map<std::string, std::string> Hyperparams::to_map() const {
  return {
      {"gamma", fmt_double(gamma)},
      {"learning_rate", fmt_double(learning_rate)},
      {"beta_t", fmt_double(beta_t)},
      {"beta_z", fmt_double(beta_z)},
      {"beta_a", fmt_double(beta_a)},
      {"eta", fmt_double(eta)},
      {"latent_dim", std::to_string(latent_dim)},
      {"rho", fmt_double(rho)},
      {"target_rate", fmt_double(target_rate)},
      {"behavior_rate", fmt_double(behavior_rate)},
      {"trace_lambda", fmt_double(trace_lambda)},
      {"tau_opt", fmt_double(tau_opt)},
      {"adam_beta1", fmt_double(adam_beta1)},
      {"adam_beta2", fmt_double(adam_beta2)},
      {"adam_eps", fmt_double(adam_eps)},
      {"nu_init", fmt_double(nu_init)},
      {"nu_learnable", nu_learnable ? "true" : "false"},
      {"scale_floor", fmt_double(scale_floor)},
      {"esn_layers", std::to_string(esn_layers)},
      {"esn_units", std::to_string(esn_units)},
      {"esn_leak", fmt_double(esn_leak)},
  };
}

double td_error(double reward, double v_state, double v_next, bool terminal, double gamma) {
  return reward + gamma * v_next * (terminal ? 0.0 : 1.0) - v_state;
}

double optimality_coeff(double delta, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("optimality_coeff: tau must be > 0");
  return tau * std::expm1(std::min(delta / tau, ad::kExpClamp));
}

ad::Tensor trajectory_loss(double g, const ad::Tensor& model_loss, const ad::Tensor& log_pi) {
  return (log_pi - model_loss) * (-g);
}

ad::Tensor value_loss(double g, const ad::Tensor& value) { return value * (-g); }

ad::Tensor total_loss(const LossParts& parts) {
  return parts.traj + parts.value + parts.model * parts.tau;
}

Optimizer::Optimizer(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Optimizer::step(const std::vector<Parameter*>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params) {
    const ad::Matrix& g = p->grad();
    p->first_moment = beta1_ * p->first_moment + (1.0 - beta1_) * g;
    p->second_moment = beta2_ * p->second_moment + (1.0 - beta2_) * g.cwiseAbs2();
    p->max_second_moment = p->max_second_moment.cwiseMax(p->second_moment);
    p->mutable_value().array() -= lr_ * (p->first_moment.array() / c1) /
                                  ((p->max_second_moment.array() / c2).sqrt() + eps_);
  }
}

void target_update(const ParameterSet& current, ParameterSet& target, double rate) {
  target_update(current, target, [rate](const std::string&) { return rate; });
}

void target_update(const ParameterSet& current, ParameterSet& target,
                   const std::function<double(const std::string&)>& rate_of) {
  for (auto& t : target) {
    const double rate = rate_of(t->name);
    if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("target rate must be in [0, 1]");
    const Parameter& c = current.at(t->name);
    if (rate == 1.0)
      t->mutable_value() = c.value();
    else if (rate > 0.0)
      t->mutable_value() = (1.0 - rate) * t->value() + rate * c.value();
  }
}

EligibilityTraces::EligibilityTraces(std::vector<Parameter*> params)
    : params_(std::move(params)) {
  for (Parameter* p : params_) traces_.push_back(ad::Matrix::Zero(p->value().rows(), p->value().cols()));
}

void EligibilityTraces::reset() {
  for (auto& t : traces_) t.setZero();
}

void EligibilityTraces::accumulate(double decay) {
  for (std::size_t i = 0; i < params_.size(); ++i)
    traces_[i] = decay * traces_[i] + params_[i]->grad();
}

Agent::Agent(Eigen::Index state_dim, Eigen::Index action_dim, const Hyperparams& hp,
             std::uint64_t seed)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      hp_((hp.validate(), hp)),
      seed_(seed),
      rng_(seed),
      hs_(state_dim, esn_options(hp, seed ^ kStateHistorySalt)),
      ha_(action_dim, esn_options(hp, seed ^ kActionHistorySalt)),
      policy_(params_, "", state_dim, action_dim, ha_.feature_dim(), rng_, head_options(hp)),
      value_(params_, "value", state_dim, 1, rng_),
      model_(params_, "model/", state_dim, action_dim, hs_.feature_dim(), hp.latent_dim, rng_,
             head_options(hp)),
      target_policy_(target_params_, "", state_dim, action_dim, ha_.feature_dim(), rng_,
                     head_options(hp)),
      target_value_(target_params_, "value", state_dim, 1, rng_),
      optimizer_(hp.learning_rate, hp.adam_beta1, hp.adam_beta2, hp.adam_eps),
      traces_(params_.select({"fb/", "ff/", "value/"})) {
  target_update(params_, target_params_, 1.0);
  target_params_.set_requires_grad(false);
  for (auto& p : params_) all_params_.push_back(p.get());
}

std::vector<Parameter*> Agent::traced_params() { return traces_.params(); }

void Agent::begin_episode() {
  hs_.reset();
  ha_.reset();
  traces_.reset();
}

PolicyPair Agent::policy_pair(const ad::Vector& observation, EvalMode mode) const {
  return make_policy_pair(policy_.fb_forward(ad::constant(observation)),
                          policy_.ff_forward(ad::constant(ha_.feature())), hp_.beta_t, mode);
}

ActionChoice Agent::act(const ad::Vector& observation) {
  const PolicyPair behavior =
      make_policy_pair(target_policy_.fb_forward(ad::constant(observation)),
                       target_policy_.ff_forward(ad::constant(ha_.feature())), hp_.beta_t);
  const ComposedSample s = compose_and_sample(behavior, rng_);
  return {s.action, s.log_density, s.from_fb, behavior.w};
}

ActionChoice Agent::act_deterministic(const ad::Vector& observation, EvalMode mode) const {
  const PolicyPair pair = policy_pair(observation, mode);
  const ComposedSample s = compose_median(pair);
  return {s.action, s.log_density, s.from_fb, pair.w};
}

void Agent::observe(const ad::Vector& observation, const ad::Vector& action) {
  hs_.step(observation);
  ha_.step(action);
}

Transition Agent::make_transition(const ad::Vector& state, const ActionChoice& choice,
                                  double reward, const ad::Vector& next_state,
                                  bool terminal) const {
  Transition tr;
  tr.state = state;
  tr.action = choice.action;
  tr.reward = reward;
  tr.next_state = next_state;
  tr.terminal = terminal;
  tr.behavior_log_density = choice.log_density;
  tr.state_history = hs_.feature();
  tr.action_history = ha_.feature();
  return tr;
}

double Agent::value(const ad::Vector& state) const {
  return value_.forward(ad::constant(state)).item();
}

StepMetrics Agent::train_step(const Transition& tr) {
  params_.zero_grad();

  const ad::Tensor state = ad::constant(tr.state);
  const PolicyPair pair = make_policy_pair(policy_.fb_forward(state),
                                           policy_.ff_forward(ad::constant(tr.action_history)),
                                           hp_.beta_t);
  const ad::Tensor log_pi = mixture_logpdf(pair.mixture(), ad::constant(tr.action));
  const ad::Tensor v = value_.forward(state);
  const double v_next =
      tr.terminal ? 0.0 : target_value_.forward(ad::constant(tr.next_state)).item();

  const double delta = td_error(tr.reward, v.item(), v_next, tr.terminal, hp_.gamma);
  const double g = optimality_coeff(delta, hp_.tau_opt);

  const ModelNoise noise = model_.draw_noise(rng_, pair);
  const ModelLossParts model = model_.model_loss(tr.state, tr.next_state, tr.state_history,
                                                 pair, tr.action, noise, hp_.beta_z,
                                                 hp_.beta_a, hp_.eta);

  const LossParts parts{trajectory_loss(g, model.total, log_pi), value_loss(g, v), model.total,
                        hp_.tau_opt};
  const double loss_all = total_loss(parts).item();
  if (!std::isfinite(loss_all)) {
    std::ostringstream os;
    os << "non-finite loss: delta=" << delta << " g=" << g << " log_pi=" << log_pi.item()
       << " V=" << v.item() << " recon=" << model.recon.item() << " kl=" << model.kl_z.item()
       << " ce=" << model.ce_policy.item() << " w=" << pair.w << " H_fb=" << pair.h_fb
       << " H_ff=" << pair.h_ff;
    throw NumericalError(os.str());
  }

  // L_all = g (-ln pi - V) + (g + tau) L_model. The first bracket is the
  // per-step eligibility of the policy and value; it is traced and scaled by
  // the current g. The model term is applied as is.
  ad::backward(-log_pi - v);
  traces_.accumulate(hp_.gamma * hp_.trace_lambda);
  for (Parameter* p : traces_.params()) p->node.zero_grad();
  ad::backward(model.total * (g + hp_.tau_opt));
  for (std::size_t i = 0; i < traces_.params().size(); ++i) {
    Parameter* p = traces_.params()[i];
    p->node.node()->grad += g * traces_.trace(i);
  }
  for (Parameter* p : all_params_)
    if (!p->grad().allFinite()) throw NumericalError("non-finite gradient in " + p->name);

  optimizer_.step(all_params_);
  target_update(params_, target_params_, [this](const std::string& name) {
    return name.rfind("value/", 0) == 0 ? hp_.target_rate : hp_.behavior_rate;
  });
  if (tr.terminal) traces_.reset();

  StepMetrics m;
  m.w = pair.w;
  m.d = pair.d;
  m.h_fb = pair.h_fb;
  m.h_ff = pair.h_ff;
  m.delta = delta;
  m.g = g;
  m.value = v.item();
  m.log_pi = log_pi.item();
  m.loss_traj = parts.traj.item();
  m.loss_value = parts.value.item();
  m.loss_model = model.total.item();
  m.loss_model_recon = model.recon.item();
  m.loss_model_kl = model.kl_z.item();
  m.loss_model_ce = model.ce_policy.item();
  m.loss_all = loss_all;
  return m;
}

void Agent::save(const std::filesystem::path& path) const {
  Checkpoint ck = Checkpoint::capture(params_);
  for (const auto& p : target_params_) ck.tensors["target:" + p->name] = p->value();
  for (const auto& [k, v] : hp_.to_map()) ck.metadata["hp." + k] = v;
  ck.metadata["state_dim"] = std::to_string(state_dim_);
  ck.metadata["action_dim"] = std::to_string(action_dim_);
  ck.metadata["seed"] = std::to_string(seed_);
  ck.metadata["esn.state_seed"] = std::to_string(hs_.options().seed);
  ck.metadata["esn.action_seed"] = std::to_string(ha_.options().seed);
  ck.metadata["esn.shape"] = std::to_string(hp_.esn_layers) + "x" + std::to_string(hp_.esn_units);
  ck.save(path);
}

void Agent::load(const std::filesystem::path& path) {
  const Checkpoint ck = Checkpoint::load(path);
  auto expect = [&](const std::string& key, const std::string& want) {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end() || it->second != want)
      throw std::runtime_error("checkpoint " + key + " mismatch (want " + want + ")");
  };
  expect("state_dim", std::to_string(state_dim_));
  expect("action_dim", std::to_string(action_dim_));
  expect("esn.state_seed", std::to_string(hs_.options().seed));
  expect("esn.action_seed", std::to_string(ha_.options().seed));
  ck.restore(params_);
  Checkpoint target;
  for (const auto& p : target_params_) {
    auto it = ck.tensors.find("target:" + p->name);
    if (it == ck.tensors.end()) throw std::runtime_error("checkpoint lacks target " + p->name);
    target.tensors[p->name] = it->second;
  }
  target.restore(target_params_);
}

}  // namespace fbff

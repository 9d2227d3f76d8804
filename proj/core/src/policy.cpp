#include "fbff/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fbff {

EvalMode parse_eval_mode(const std::string& text) {
  if (text == "composed") return EvalMode::kComposed;
  if (text == "fb-only" || text == "fb") return EvalMode::kFbOnly;
  if (text == "ff-only" || text == "ff") return EvalMode::kFfOnly;
  throw std::invalid_argument("unknown eval mode '" + text + "'");
}

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kComposed: return "composed";
    case EvalMode::kFbOnly: return "fb-only";
    case EvalMode::kFfOnly: return "ff-only";
  }
  return "composed";
}

double mixture_ratio(double h_fb, double h_ff, double d, double beta_t) {
  if (std::isnan(h_fb) || std::isnan(h_ff))
    throw std::invalid_argument("mixture_ratio: NaN entropy");
  if (!(d >= 0.0)) throw std::invalid_argument("mixture_ratio: distance must be >= 0");
  if (!(beta_t > 0.0)) throw std::invalid_argument("mixture_ratio: beta_t must be > 0");
  const double e_fb = -h_fb * d * beta_t;
  const double e_ff = -h_ff * d * beta_t;
  const double top = std::max(e_fb, e_ff);
  const double a = std::exp(e_fb - top);
  const double b = std::exp(e_ff - top);
  return a / (a + b);
}

PolicyPair make_policy_pair(StudentTDiag fb, StudentTDiag ff, double beta_t,
                            EvalMode mode) {
  const double h_fb = entropy(fb);
  const double h_ff = entropy(ff);
  const double d = (fb.loc().value() - ff.loc().value()).norm();
  double w = 0.0;
  switch (mode) {
    case EvalMode::kComposed: w = mixture_ratio(h_fb, h_ff, d, beta_t); break;
    case EvalMode::kFbOnly: w = 1.0; break;
    case EvalMode::kFfOnly: w = 0.0; break;
  }
  return {std::move(fb), std::move(ff), h_fb, h_ff, d, w};
}

ComposedSample compose_and_sample(const PolicyPair& pair, double u,
                                  const StudentTNoise& component_noise) {
  const bool from_fb = u < pair.w;
  const StudentTDiag& chosen = from_fb ? pair.fb : pair.ff;
  const ad::Vector action = sample_reparam(chosen.detached(), component_noise).value();
  const MixturePolicyDist mix(pair.fb.detached(), pair.ff.detached(), pair.w);
  const double log_density = mixture_logpdf(mix, ad::constant(action)).item();
  return {action, log_density, from_fb};
}

ComposedSample compose_and_sample(const PolicyPair& pair, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const StudentTDiag& chosen = u < pair.w ? pair.fb : pair.ff;
  return compose_and_sample(pair, u, StudentTNoise::draw(rng, chosen.dim(), chosen.nu()));
}

ComposedSample compose_median(const PolicyPair& pair) {
  const double u = 0.5;
  const StudentTDiag& chosen = u < pair.w ? pair.fb : pair.ff;
  return compose_and_sample(pair, u, StudentTNoise::median(chosen.dim(), chosen.nu()));
}

PolicyHeads::PolicyHeads(ParameterSet& params, const std::string& prefix,
                         Eigen::Index state_dim, Eigen::Index action_dim,
                         Eigen::Index history_dim, std::mt19937_64& rng,
                         const DistHeadOptions& options)
    : fb_(params, prefix + "fb", state_dim, action_dim, rng, options),
      ff_(params, prefix + "ff", history_dim, action_dim, rng, options) {}

}  // namespace fbff

#pragma once

#include "fbff/distributions.hpp"
#include "fbff/networks.hpp"

#include <random>
#include <string>

namespace fbff {

enum class EvalMode { kComposed, kFbOnly, kFfOnly };

EvalMode parse_eval_mode(const std::string& text);
std::string to_string(EvalMode mode);

/// w = softmax over (-H_fb d beta_t, -H_ff d beta_t), first component.
/// Throws std::invalid_argument on NaN entropies, d < 0 or beta_t <= 0.
double mixture_ratio(double h_fb, double h_ff, double d, double beta_t);

/// Both component distributions plus the detached quantities that set w.
struct PolicyPair {
  StudentTDiag fb;
  StudentTDiag ff;
  double h_fb;
  double h_ff;
  double d;
  double w;

  MixturePolicyDist mixture() const { return {fb, ff, w}; }
};

/// Fills in entropies, mean distance and w (overridden to 1 or 0 by the
/// decomposed modes).
PolicyPair make_policy_pair(StudentTDiag fb, StudentTDiag ff, double beta_t,
                            EvalMode mode = EvalMode::kComposed);

struct ComposedSample {
  ad::Vector action;
  double log_density;
  bool from_fb;
};

/// Picks fb when u < w, then draws from that component with its noise.
ComposedSample compose_and_sample(const PolicyPair& pair, double u,
                                  const StudentTNoise& component_noise);
ComposedSample compose_and_sample(const PolicyPair& pair, std::mt19937_64& rng);
/// Median action: component chosen at u = 0.5, zero variate.
ComposedSample compose_median(const PolicyPair& pair);

/// pi_FB(a | s) and pi_FF(a | h^a).
class PolicyHeads {
 public:
  PolicyHeads(ParameterSet& params, const std::string& prefix, Eigen::Index state_dim,
              Eigen::Index action_dim, Eigen::Index history_dim, std::mt19937_64& rng,
              const DistHeadOptions& options);

  StudentTDiag fb_forward(const ad::Tensor& state) const { return fb_.forward(state); }
  StudentTDiag ff_forward(const ad::Tensor& action_history) const {
    return ff_.forward(action_history);
  }

  Eigen::Index action_dim() const { return fb_.out_dim(); }

 private:
  DistHead fb_;
  DistHead ff_;
};

}  // namespace fbff

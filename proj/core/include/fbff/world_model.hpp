#pragma once

// Variational latent dynamics: encoder q(z | s, h^s), time-dependent prior
// p(z | h^s), deterministic latent transition z' = f(z, a) and decoder
// p(s' | z'). Its loss couples the two policies through a cross-entropy
// term weighted by w^2.

#include "fbff/distributions.hpp"
#include "fbff/networks.hpp"
#include "fbff/policy.hpp"

namespace fbff {

/// Value of a, gradient into a scaled by eta. Throws for eta outside [0, 1].
ad::Tensor graph_cut(const ad::Tensor& a, double eta);

struct ModelLossParts {
  ad::Tensor recon;      // -ln p(s' | z')
  ad::Tensor kl_z;       // KL(q || prior), single-sample estimate
  ad::Tensor ce_policy;  // H(pi_FB || pi_FF), single-sample estimate
  double beta_z;
  double beta_a;
  double w;
  ad::Tensor total;      // recon + beta_z kl_z + beta_a w^2 ce_policy
};

/// Noise consumed by one model_loss evaluation.
struct ModelNoise {
  StudentTNoise latent;  // draw of z from q
  StudentTNoise policy;  // draw from pi_FB for the cross entropy
};

class WorldModel {
 public:
  WorldModel(ParameterSet& params, const std::string& prefix, Eigen::Index state_dim,
             Eigen::Index action_dim, Eigen::Index history_dim, Eigen::Index latent_dim,
             std::mt19937_64& rng, const DistHeadOptions& options);

  StudentTDiag encode(const ad::Tensor& state, const ad::Tensor& state_history) const;
  StudentTDiag prior(const ad::Tensor& state_history) const;
  ad::Tensor latent_dynamics(const ad::Tensor& z, const ad::Tensor& cut_action) const;
  StudentTDiag decode(const ad::Tensor& next_latent) const;

  ModelLossParts model_loss(const ad::Vector& state, const ad::Vector& next_state,
                            const ad::Vector& state_history, const PolicyPair& policy,
                            const ad::Vector& action, const ModelNoise& noise,
                            double beta_z, double beta_a, double eta) const;

  ModelNoise draw_noise(std::mt19937_64& rng, const PolicyPair& policy) const;

  Eigen::Index latent_dim() const { return latent_dim_; }

 private:
  Eigen::Index latent_dim_;
  DistHead encoder_;
  DistHead prior_;
  MlpHead dynamics_;
  DistHead decoder_;
};

}  // namespace fbff

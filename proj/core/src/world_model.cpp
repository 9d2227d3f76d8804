#include "fbff/world_model.hpp"

#include <stdexcept>

namespace fbff {

ad::Tensor graph_cut(const ad::Tensor& a, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("graph_cut: eta must be in [0, 1]");
  // Equivalent to eta * a + (1 - eta) * stop_gradient(a), but the forward
  // value is a itself rather than a rounded convex combination.
  if (!a.requires_grad()) return ad::constant(a.value());
  auto node = std::make_shared<ad::Node>();
  node->value = a.value();
  node->requires_grad = true;
  node->inputs = {a.node()};
  node->backprop = [eta](ad::Node& self) {
    ad::Node& in = *self.inputs[0];
    in.ensure_grad();
    in.grad += eta * self.grad;
  };
  return ad::Tensor(std::move(node));
}

WorldModel::WorldModel(ParameterSet& params, const std::string& prefix,
                       Eigen::Index state_dim, Eigen::Index action_dim,
                       Eigen::Index history_dim, Eigen::Index latent_dim,
                       std::mt19937_64& rng, const DistHeadOptions& options)
    : latent_dim_(latent_dim),
      encoder_(params, prefix + "encoder", state_dim + history_dim, latent_dim, rng, options),
      prior_(params, prefix + "prior", history_dim, latent_dim, rng, options),
      dynamics_(params, prefix + "dynamics", latent_dim + action_dim, latent_dim, rng),
      decoder_(params, prefix + "decoder", latent_dim, state_dim, rng, options) {}

StudentTDiag WorldModel::encode(const ad::Tensor& state,
                                const ad::Tensor& state_history) const {
  return encoder_.forward(ad::concat({state, state_history}));
}

StudentTDiag WorldModel::prior(const ad::Tensor& state_history) const {
  return prior_.forward(state_history);
}

ad::Tensor WorldModel::latent_dynamics(const ad::Tensor& z,
                                       const ad::Tensor& cut_action) const {
  return dynamics_.forward(ad::concat({z, cut_action}));
}

StudentTDiag WorldModel::decode(const ad::Tensor& next_latent) const {
  return decoder_.forward(next_latent);
}

ModelNoise WorldModel::draw_noise(std::mt19937_64& rng, const PolicyPair& policy) const {
  ModelNoise noise;
  noise.latent = StudentTNoise::draw(rng, latent_dim_, encoder_.dof());
  noise.policy = StudentTNoise::draw(rng, policy.fb.dim(), policy.fb.nu());
  return noise;
}

ModelLossParts WorldModel::model_loss(const ad::Vector& state, const ad::Vector& next_state,
                                      const ad::Vector& state_history,
                                      const PolicyPair& policy, const ad::Vector& action,
                                      const ModelNoise& noise, double beta_z,
                                      double beta_a, double eta) const {
  const ad::Tensor hs = ad::constant(state_history);
  const StudentTDiag q = encode(ad::constant(state), hs);
  const StudentTDiag p = prior(hs);

  const ad::Tensor z = sample_reparam(q, noise.latent);
  const ad::Tensor kl = logpdf(q, z) - logpdf(p, z);

  const ad::Tensor a = graph_cut(ad::constant(action), eta);
  const ad::Tensor z_next = latent_dynamics(z, a);
  const StudentTDiag decoded = decode(z_next);
  const ad::Tensor recon = -logpdf(decoded, ad::constant(next_state));

  const ad::Tensor ce = mc_cross_entropy(policy.fb, policy.ff, noise.policy);

  const double w = policy.w;
  ad::Tensor total = recon + kl * beta_z + ce * (beta_a * w * w);
  return {recon, kl, ce, beta_z, beta_a, w, total};
}

}  // namespace fbff

#pragma once

// Diagonal student-t distributions and the estimators built on them. Every
// stochastic head in the agent (both policies, encoder, prior, decoder)
// emits one of these.

#include "fbff/autodiff.hpp"

#include <random>

namespace fbff {

/// Location/scale vectors plus one shared degrees-of-freedom scalar.
class StudentTDiag {
 public:
  /// Throws std::invalid_argument for non-positive scale or dof, or when
  /// loc and scale disagree in shape.
  StudentTDiag(ad::Tensor loc, ad::Tensor scale, ad::Tensor dof);

  const ad::Tensor& loc() const { return loc_; }
  const ad::Tensor& scale() const { return scale_; }
  const ad::Tensor& dof() const { return dof_; }
  Eigen::Index dim() const { return loc_.rows(); }
  double nu() const { return dof_.item(); }

  /// Same parameter values with the gradient path removed.
  StudentTDiag detached() const;

 private:
  ad::Tensor loc_;
  ad::Tensor scale_;
  ad::Tensor dof_;
};

/// Primitive noise for `count` reparameterized draws: `normal` holds
/// dim * count standard normal variates (draw-major), `chi2` one chi-square
/// variate per draw with the distribution's dof.
struct StudentTNoise {
  ad::Vector normal;
  ad::Vector chi2;

  Eigen::Index count() const { return chi2.size(); }
  static StudentTNoise draw(std::mt19937_64& rng, Eigen::Index dim, double nu,
                            Eigen::Index count = 1);
  /// The zero variate: maps every draw to the location.
  static StudentTNoise median(Eigen::Index dim, double nu, Eigen::Index count = 1);
};

/// Sum over dimensions of univariate student-t log-densities.
ad::Tensor logpdf(const StudentTDiag& d, const ad::Tensor& x);
double logpdf(const StudentTDiag& d, const ad::Vector& x);

/// x = loc + scale * t for each draw; draws stacked into one column of
/// dim * count rows. The chi-square path carries no gradient into dof.
ad::Tensor sample_reparam(const StudentTDiag& d, const StudentTNoise& noise);

/// Closed-form differential entropy in nats (sum over dimensions).
double entropy(const StudentTDiag& d);
double entropy_1d(double scale, double nu);

/// Two-component mixture w * fb + (1 - w) * ff; w acts as a constant.
struct MixturePolicyDist {
  StudentTDiag fb;
  StudentTDiag ff;
  double w;

  /// Throws std::invalid_argument when w is outside [0, 1] or dims differ.
  MixturePolicyDist(StudentTDiag fb_dist, StudentTDiag ff_dist, double weight);
};

ad::Tensor mixture_logpdf(const MixturePolicyDist& m, const ad::Tensor& x);

/// (1/K) sum_k [log q(z_k) - log p(z_k)], z_k reparameterized from q.
ad::Tensor mc_kl(const StudentTDiag& q, const StudentTDiag& p,
                 const StudentTNoise& noise);

/// -(1/K) sum_k log b(x_k), x_k reparameterized from a.
ad::Tensor mc_cross_entropy(const StudentTDiag& a, const StudentTDiag& b,
                            const StudentTNoise& noise);

/// Stacks `times` copies of a column vector.
ad::Tensor tile(const ad::Tensor& x, Eigen::Index times);

}  // namespace fbff

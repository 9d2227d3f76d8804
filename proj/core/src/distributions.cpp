#include "fbff/distributions.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fbff {

StudentTDiag::StudentTDiag(ad::Tensor loc, ad::Tensor scale, ad::Tensor dof)
    : loc_(std::move(loc)), scale_(std::move(scale)), dof_(std::move(dof)) {
  if (loc_.rows() != scale_.rows() || loc_.cols() != 1 || scale_.cols() != 1)
    throw std::invalid_argument("student-t loc/scale must be matching columns");
  if (!dof_.is_scalar()) throw std::invalid_argument("student-t dof must be scalar");
  if (!(scale_.value().array() > 0.0).all())
    throw std::invalid_argument("student-t scale must be positive");
  if (!(dof_.item() > 0.0)) throw std::invalid_argument("student-t dof must be positive");
}

StudentTDiag StudentTDiag::detached() const {
  return {ad::stop_gradient(loc_), ad::stop_gradient(scale_), ad::stop_gradient(dof_)};
}

StudentTNoise StudentTNoise::draw(std::mt19937_64& rng, Eigen::Index dim,
                                  double nu, Eigen::Index count) {
  StudentTNoise n;
  n.normal.resize(dim * count);
  n.chi2.resize(count);
  std::normal_distribution<double> normal;
  std::chi_squared_distribution<double> chi2(nu);
  for (Eigen::Index k = 0; k < count; ++k) {
    for (Eigen::Index i = 0; i < dim; ++i) n.normal(k * dim + i) = normal(rng);
    n.chi2(k) = chi2(rng);
  }
  return n;
}

StudentTNoise StudentTNoise::median(Eigen::Index dim, double nu, Eigen::Index count) {
  StudentTNoise n;
  n.normal = ad::Vector::Zero(dim * count);
  n.chi2 = ad::Vector::Constant(count, nu);
  return n;
}

ad::Tensor tile(const ad::Tensor& x, Eigen::Index times) {
  if (times == 1) return x;
  std::vector<ad::Tensor> parts(static_cast<std::size_t>(times), x);
  return ad::concat(parts);
}

ad::Tensor logpdf(const StudentTDiag& d, const ad::Tensor& x) {
  if (x.cols() != 1 || x.rows() % d.dim() != 0)
    throw std::invalid_argument("logpdf: sample shape mismatch");
  const Eigen::Index reps = x.rows() / d.dim();
  const ad::Tensor& nu = d.dof();
  const ad::Tensor loc = tile(d.loc(), reps);
  const ad::Tensor scale = tile(d.scale(), reps);
  const double n = static_cast<double>(x.rows());

  const ad::Tensor z = (x - loc) / scale;
  const ad::Tensor log_kernel = ad::log1p(ad::square(z) / nu);
  // Per-coordinate constant, multiplied by the number of coordinates.
  const ad::Tensor norm = ad::lgamma((nu + 1.0) * 0.5) - ad::lgamma(nu * 0.5) -
                          0.5 * ad::log(nu * std::numbers::pi);
  return norm * n - ad::sum(ad::log(scale)) -
         (nu + 1.0) * 0.5 * ad::sum(log_kernel);
}

double logpdf(const StudentTDiag& d, const ad::Vector& x) {
  return logpdf(d.detached(), ad::constant(x)).item();
}

ad::Tensor sample_reparam(const StudentTDiag& d, const StudentTNoise& noise) {
  const Eigen::Index dim = d.dim();
  if (noise.normal.size() != dim * noise.count())
    throw std::invalid_argument("sample_reparam: noise shape mismatch");
  const double nu = d.nu();
  ad::Vector t(noise.normal.size());
  for (Eigen::Index k = 0; k < noise.count(); ++k) {
    const double denom = std::sqrt(noise.chi2(k) / nu);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double eps = noise.normal(k * dim + i);
      // Guard the 0/0 of an all-zero variate with a zero chi-square draw.
      t(k * dim + i) = eps == 0.0 ? 0.0 : eps / denom;
    }
  }
  return tile(d.loc(), noise.count()) + tile(d.scale(), noise.count()) * ad::constant(t);
}

double entropy_1d(double scale, double nu) {
  using boost::math::digamma;
  const double half = 0.5 * (nu + 1.0);
  const double log_beta = std::lgamma(0.5 * nu) + std::lgamma(0.5) - std::lgamma(half);
  return half * (digamma(half) - digamma(0.5 * nu)) + 0.5 * std::log(nu) + log_beta +
         std::log(scale);
}

double entropy(const StudentTDiag& d) {
  double h = 0.0;
  const double nu = d.nu();
  for (Eigen::Index i = 0; i < d.dim(); ++i) h += entropy_1d(d.scale().value()(i), nu);
  return h;
}

MixturePolicyDist::MixturePolicyDist(StudentTDiag fb_dist, StudentTDiag ff_dist,
                                     double weight)
    : fb(std::move(fb_dist)), ff(std::move(ff_dist)), w(weight) {
  if (!(w >= 0.0 && w <= 1.0))
    throw std::invalid_argument("mixture ratio must lie in [0, 1]");
  if (fb.dim() != ff.dim()) throw std::invalid_argument("mixture components differ in dim");
}

ad::Tensor mixture_logpdf(const MixturePolicyDist& m, const ad::Tensor& x) {
  const double log_w = std::log(m.w);
  const double log_1mw = std::log1p(-m.w);
  return ad::logaddexp(logpdf(m.fb, x) + log_w, logpdf(m.ff, x) + log_1mw);
}

ad::Tensor mc_kl(const StudentTDiag& q, const StudentTDiag& p,
                 const StudentTNoise& noise) {
  if (noise.count() < 1) throw std::invalid_argument("mc_kl needs at least one draw");
  const ad::Tensor z = sample_reparam(q, noise);
  const double inv_k = 1.0 / static_cast<double>(noise.count());
  return (logpdf(q, z) - logpdf(p, z)) * inv_k;
}

ad::Tensor mc_cross_entropy(const StudentTDiag& a, const StudentTDiag& b,
                            const StudentTNoise& noise) {
  if (noise.count() < 1)
    throw std::invalid_argument("mc_cross_entropy needs at least one draw");
  const ad::Tensor x = sample_reparam(a, noise);
  return logpdf(b, x) * (-1.0 / static_cast<double>(noise.count()));
}

}  // namespace fbff

#include "fbff/distributions.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace fbff;
using ad::Matrix;
using ad::Tensor;
using ad::Vector;

namespace {

StudentTDiag make(const Vector& mu, const Vector& sigma, double nu) {
  return {ad::constant(Matrix(mu)), ad::constant(Matrix(sigma)), ad::constant(nu)};
}

StudentTDiag make1(double mu, double sigma, double nu) {
  return make(Vector::Constant(1, mu), Vector::Constant(1, sigma), nu);
}

double reference_logpdf(double x, double mu, double sigma, double nu) {
  boost::math::students_t_distribution<double> t(nu);
  return std::log(boost::math::pdf(t, (x - mu) / sigma) / sigma);
}

TEST(LogPdf, CauchyAtOrigin) {
  EXPECT_NEAR(logpdf(make1(0, 1, 1), Vector::Zero(1)), -std::log(std::numbers::pi), 1e-12);
}

TEST(LogPdf, GaussianLimit) {
  EXPECT_NEAR(logpdf(make1(0, 1, 1e6), Vector::Zero(1)), -0.5 * std::log(2 * std::numbers::pi),
              1e-4);
}

TEST(LogPdf, TranslationInvariant) {
  for (double c : {-3.0, 0.5, 7.25})
    EXPECT_NEAR(logpdf(make1(c, 1.3, 4), Vector::Constant(1, c)),
                logpdf(make1(0, 1.3, 4), Vector::Zero(1)), 1e-12);
}

TEST(LogPdf, MatchesBoostDensityAndSumsOverDimensions) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3), s(0.2, 3), n(1.1, 30);
  for (int trial = 0; trial < 50; ++trial) {
    Vector mu(3), sigma(3), x(3);
    for (int i = 0; i < 3; ++i) {
      mu(i) = u(rng);
      sigma(i) = s(rng);
      x(i) = u(rng);
    }
    const double nu = n(rng);
    double want = 0.0;
    for (int i = 0; i < 3; ++i) want += reference_logpdf(x(i), mu(i), sigma(i), nu);
    EXPECT_NEAR(logpdf(make(mu, sigma, nu), x), want, 1e-10);
  }
}

TEST(LogPdf, DensityIntegratesToOne) {
  boost::math::quadrature::sinh_sinh<double> integrator;
  for (double nu : {1.0, 3.0, 10.0, 1e6}) {
    const StudentTDiag d = make1(0.3, 0.7, nu);
    const double mass = integrator.integrate(
        [&](double x) { return std::exp(logpdf(d, Vector::Constant(1, x))); });
    EXPECT_NEAR(mass, 1.0, 1e-3) << "nu=" << nu;
  }
}

TEST(LogPdf, GradientInLocationScaleDofMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix theta(5, 1);  // mu (2), log sigma (2), nu - 1
    theta << u(rng), u(rng), 0.3 * u(rng), 0.3 * u(rng), 2.0 + u(rng);
    const Matrix x = Matrix::Constant(2, 1, u(rng));
    auto f = [&](const Tensor& t) {
      StudentTDiag d(ad::slice(t, 0, 2), ad::exp(ad::slice(t, 2, 2)), ad::slice(t, 4, 1) + 1.0);
      return logpdf(d, ad::constant(x));
    };
    worst = std::max(worst, oracle::check(f, theta));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Construction, RejectsNonPositiveScale) {
  EXPECT_THROW(make1(0, 0.0, 3), std::invalid_argument);
  EXPECT_THROW(make1(0, -1.0, 3), std::invalid_argument);
  EXPECT_THROW(make1(0, 1.0, 0.0), std::invalid_argument);
}

TEST(SampleReparam, ZeroVariateGivesLocation) {
  const StudentTDiag d = make(Vector::LinSpaced(3, -1, 1), Vector::Ones(3), 5);
  const Tensor x = sample_reparam(d, StudentTNoise::median(3, 5));
  EXPECT_TRUE(x.value().isApprox(d.loc().value()));
}

TEST(SampleReparam, LocationJacobianIsIdentity) {
  std::mt19937_64 rng(2);
  const StudentTNoise noise = StudentTNoise::draw(rng, 3, 5);
  Tensor mu = ad::variable(Matrix(Vector::Zero(3)));
  StudentTDiag d(mu, ad::constant(Matrix(Vector::Ones(3))), ad::constant(5.0));
  ad::backward(ad::sum(sample_reparam(d, noise)));
  EXPECT_TRUE(mu.grad().isApprox(Matrix::Ones(3, 1)));
}

TEST(SampleReparam, NoGradientIntoDof) {
  std::mt19937_64 rng(2);
  Tensor nu = ad::variable(5.0);
  StudentTDiag d(ad::constant(Matrix::Zero(1, 1)), ad::constant(Matrix::Ones(1, 1)), nu);
  ad::backward(ad::sum(sample_reparam(d, StudentTNoise::draw(rng, 1, 5.0))));
  EXPECT_EQ(nu.grad()(0), 0.0);
}

TEST(SampleReparam, EmpiricalMean) {
  std::mt19937_64 rng(123);
  const StudentTDiag d = make1(2.0, 1.0, 5.0);
  const StudentTNoise noise = StudentTNoise::draw(rng, 1, 5.0, 100000);
  EXPECT_NEAR(sample_reparam(d, noise).value().mean(), 2.0, 0.02);
}

TEST(SampleReparam, EmpiricalQuantilesFollowStudentT) {
  std::mt19937_64 rng(7);
  const double nu = 3.0;
  const StudentTNoise noise = StudentTNoise::draw(rng, 1, nu, 100000);
  const Matrix x = sample_reparam(make1(0, 1, nu), noise).value();
  boost::math::students_t_distribution<double> t(nu);
  for (double p : {0.1, 0.25, 0.75, 0.9}) {
    const double q = boost::math::quantile(t, p);
    const double frac = (x.array() < q).cast<double>().mean();
    EXPECT_NEAR(frac, p, 0.005);
  }
}

double quadrature_entropy(double sigma, double nu) {
  boost::math::quadrature::sinh_sinh<double> integrator;
  const StudentTDiag d = make1(0, sigma, nu);
  return integrator.integrate([&](double x) {
    const double l = logpdf(d, Vector::Constant(1, x));
    const double p = std::exp(l);
    return p > 0 ? -p * l : 0.0;
  });
}

TEST(Entropy, CauchyClosedForm) {
  EXPECT_NEAR(entropy(make1(0, 1, 1)), std::log(4 * std::numbers::pi), 1e-10);
}

TEST(Entropy, GaussianLimit) {
  EXPECT_NEAR(entropy(make1(0, 1, 1e6)), 0.5 * std::log(2 * std::numbers::pi * std::numbers::e),
              1e-3);
}

TEST(Entropy, MatchesQuadrature) {
  for (double nu : {1.5, 3.0, 10.0})
    for (double sigma : {0.3, 1.0, 2.5})
      EXPECT_NEAR(entropy_1d(sigma, nu), quadrature_entropy(sigma, nu), 1e-6)
          << "nu=" << nu << " sigma=" << sigma;
}

TEST(Entropy, ScaleDoublingAddsLogTwoPerDimension) {
  const Vector s = Vector::LinSpaced(3, 0.5, 1.5);
  EXPECT_NEAR(entropy(make(Vector::Zero(3), 2 * s, 4)) - entropy(make(Vector::Zero(3), s, 4)),
              3 * std::log(2.0), 1e-12);
}

TEST(Entropy, MonotoneInScaleOnGrid) {
  double prev = -1e300;
  for (double s = 0.05; s < 5; s += 0.05) {
    const double h = entropy_1d(s, 4.0);
    EXPECT_GT(h, prev);
    prev = h;
  }
}

TEST(Mixture, WeightOneIsFeedbackComponent) {
  const StudentTDiag fb = make1(0.2, 1, 4), ff = make1(-1, 2, 4);
  const Tensor x = ad::constant(0.7);
  EXPECT_EQ(mixture_logpdf({fb, ff, 1.0}, x).item(), logpdf(fb, x).item());
}

TEST(Mixture, EqualComponentsReturnComponent) {
  const StudentTDiag a = make1(0.2, 1, 4);
  const Tensor x = ad::constant(0.7);
  EXPECT_NEAR(mixture_logpdf({a, a, 0.5}, x).item(), logpdf(a, x).item(), 1e-14);
}

TEST(Mixture, DegenerateComponent) {
  // A component 1e6 scale units away contributes nothing at double precision.
  const StudentTDiag far = make1(1e300, 1e-6, 1e6);
  const StudentTDiag near = make1(0.0, 1.0 / std::sqrt(2 * std::numbers::pi), 1e6);
  const double l = mixture_logpdf({near, far, 0.5}, ad::constant(0.0)).item();
  EXPECT_NEAR(l, std::log(0.5), 1e-5);
}

TEST(Mixture, SwapSymmetry) {
  const StudentTDiag fb = make1(0.2, 1, 4), ff = make1(-1, 2, 7);
  const Tensor x = ad::constant(-0.4);
  EXPECT_NEAR(mixture_logpdf({fb, ff, 0.3}, x).item(), mixture_logpdf({ff, fb, 0.7}, x).item(),
              1e-14);
}

TEST(Mixture, RejectsWeightOutsideUnitInterval) {
  const StudentTDiag a = make1(0, 1, 4);
  EXPECT_THROW(MixturePolicyDist(a, a, 1.1), std::invalid_argument);
  EXPECT_THROW(MixturePolicyDist(a, a, -0.1), std::invalid_argument);
}

TEST(Mixture, GradientReachesBothComponents) {
  Tensor mu_fb = ad::variable(0.1), mu_ff = ad::variable(-0.5);
  const Tensor one = ad::constant(1.0);
  MixturePolicyDist m(StudentTDiag(mu_fb, one, ad::constant(4.0)),
                      StudentTDiag(mu_ff, one, ad::constant(4.0)), 0.6);
  ad::backward(mixture_logpdf(m, ad::constant(0.3)));
  EXPECT_NE(mu_fb.grad()(0), 0.0);
  EXPECT_NE(mu_ff.grad()(0), 0.0);
}

TEST(MonteCarloKl, IdenticalArgumentsGiveZero) {
  std::mt19937_64 rng(1);
  const StudentTDiag q = make(Vector::Ones(2), Vector::Constant(2, 0.5), 4);
  EXPECT_EQ(mc_kl(q, q, StudentTNoise::draw(rng, 2, 4, 7)).item(), 0.0);
}

TEST(MonteCarloKl, GaussianLimitMatchesClosedForm) {
  std::mt19937_64 rng(5);
  const StudentTDiag q = make1(1, 1, 1e6), p = make1(0, 1, 1e6);
  EXPECT_NEAR(mc_kl(q, p, StudentTNoise::draw(rng, 1, 1e6, 100000)).item(), 0.5, 0.02);
}

TEST(MonteCarloKl, NonNegativeInMeanForRandomPairs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1), s(0.5, 2), n(2, 10);
  double total = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const StudentTDiag q = make1(u(rng), s(rng), n(rng));
    const StudentTDiag p = make1(u(rng), s(rng), n(rng));
    const double kl = mc_kl(q, p, StudentTNoise::draw(rng, 1, q.nu(), 2000)).item();
    EXPECT_GT(kl, -0.05);
    total += kl;
  }
  EXPECT_GT(total / 100, 0.0);
}

TEST(MonteCarloCrossEntropy, SelfCrossEntropyIsEntropy) {
  std::mt19937_64 rng(13);
  const StudentTDiag a = make1(0.5, 1.5, 6);
  const double ce = mc_cross_entropy(a, a, StudentTNoise::draw(rng, 1, 6, 100000)).item();
  EXPECT_NEAR(ce, entropy(a), 0.02 * entropy(a));
}

TEST(MonteCarloCrossEntropy, DominatesEntropyForRandomPairs) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1), s(0.5, 2), n(2, 10);
  for (int rep = 0; rep < 100; ++rep) {
    const StudentTDiag a = make1(u(rng), s(rng), n(rng));
    const StudentTDiag b = make1(u(rng), s(rng), n(rng));
    const double ce = mc_cross_entropy(a, b, StudentTNoise::draw(rng, 1, a.nu(), 4000)).item();
    EXPECT_GT(ce, entropy(a) - 0.05);
  }
}

TEST(MonteCarloCrossEntropy, DescentPullsLocationTogether) {
  std::mt19937_64 rng(3);
  const StudentTDiag a = make1(1.0, 0.5, 5);
  double mu_b = -1.0, prev_gap = 2.0;
  for (int step = 0; step < 20; ++step) {
    Tensor mu = ad::variable(mu_b);
    const StudentTDiag b(mu, ad::constant(1.0), ad::constant(5.0));
    ad::backward(mc_cross_entropy(a, b, StudentTNoise::draw(rng, 1, 5, 256)));
    mu_b -= 0.2 * mu.grad()(0);
    const double gap = std::abs(mu_b - 1.0);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
}

TEST(MonteCarloCrossEntropy, GradientFlowsToBothArguments) {
  std::mt19937_64 rng(4);
  Tensor mu_a = ad::variable(0.3), mu_b = ad::variable(-0.2);
  const Tensor one = ad::constant(1.0), nu = ad::constant(5.0);
  ad::backward(mc_cross_entropy(StudentTDiag(mu_a, one, nu), StudentTDiag(mu_b, one, nu),
                                StudentTNoise::draw(rng, 1, 5, 1)));
  EXPECT_NE(mu_a.grad()(0), 0.0);
  EXPECT_NE(mu_b.grad()(0), 0.0);
}

}  // namespace

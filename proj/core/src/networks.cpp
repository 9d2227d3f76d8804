#include "fbff/networks.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace fbff {
namespace {

ad::Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                   double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

}  // namespace

MlpHead::MlpHead(ParameterSet& params, const std::string& name, Eigen::Index in_dim,
                 Eigen::Index out_dim, std::mt19937_64& rng, Eigen::Index hidden)
    : name_(name), in_dim_(in_dim), out_dim_(out_dim) {
  const Eigen::Index widths[] = {in_dim, hidden, hidden, out_dim};
  for (int l = 0; l < 3; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    const std::string prefix = name + "/fc" + std::to_string(l + 1);
    Layer layer;
    layer.weight = &params.add(prefix + ".weight", uniform(rng, widths[l + 1], widths[l], bound));
    layer.bias = &params.add(prefix + ".bias", uniform(rng, widths[l + 1], 1, bound));
    layers_.push_back(layer);
    if (l < 2) {
      const std::string ln = name + "/ln" + std::to_string(l + 1);
      norms_.push_back({&params.add(ln + ".gain", ad::Matrix::Ones(hidden, 1)),
                        &params.add(ln + ".shift", ad::Matrix::Zero(hidden, 1))});
    }
  }
}

ad::Tensor MlpHead::forward(const ad::Tensor& input) const {
  if (input.rows() != in_dim_ || input.cols() != 1)
    throw std::invalid_argument(name_ + ": expected input of dim " +
                                std::to_string(in_dim_) + ", got " +
                                std::to_string(input.rows()));
  ad::Tensor h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = ad::matmul(layers_[l].weight->node, h) + layers_[l].bias->node;
    if (l < norms_.size())
      h = ad::swish(ad::layer_norm(h) * norms_[l].gain->node + norms_[l].shift->node);
  }
  return h;
}

double DistHead::dof_from_raw(double raw) {
  const double sp = raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return 1.0 + sp + 1e-3;
}

double DistHead::raw_from_dof(double nu) {
  const double sp = nu - 1.0 - 1e-3;
  if (sp <= 0) throw std::invalid_argument("dof must exceed 1.001");
  return sp > 30 ? sp : std::log(std::expm1(sp));
}

DistHead::DistHead(ParameterSet& params, const std::string& name, Eigen::Index in_dim,
                   Eigen::Index out_dim, std::mt19937_64& rng,
                   const DistHeadOptions& options)
    : body_(params, name, in_dim, 2 * out_dim, rng),
      out_dim_(out_dim),
      nu_raw_(nullptr),
      options_(options) {
  if (options_.nu_learnable)
    nu_raw_ = &params.add(name + "/nu_raw",
                          ad::Matrix::Constant(1, 1, raw_from_dof(options_.nu_init)));
}

StudentTDiag DistHead::forward(const ad::Tensor& input) const {
  const ad::Tensor out = body_.forward(input);
  ad::Tensor loc = ad::slice(out, 0, out_dim_);
  ad::Tensor scale = ad::softplus(ad::slice(out, out_dim_, out_dim_)) + options_.scale_floor;
  ad::Tensor dof = nu_raw_ ? ad::softplus(nu_raw_->node) + (1.0 + 1e-3)
                           : ad::constant(options_.nu_init);
  return {loc, scale, dof};
}

double DistHead::dof() const {
  return nu_raw_ ? dof_from_raw(nu_raw_->value()(0, 0)) : options_.nu_init;
}

double spectral_radius(const ad::Matrix& m) {
  Eigen::EigenSolver<ad::Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

EchoState::EchoState(Eigen::Index input_dim, const EchoStateOptions& options)
    : input_dim_(input_dim), options_(options) {
  if (options_.layers < 1 || options_.units < 1)
    throw std::invalid_argument("echo state needs at least one layer and unit");
  std::mt19937_64 rng(options_.seed);
  std::normal_distribution<double> normal;
  for (Eigen::Index l = 0; l < options_.layers; ++l) {
    const Eigen::Index in = l == 0 ? input_dim : options_.units;
    input_.push_back(uniform(rng, options_.units, in, options_.input_scale));
    ad::Matrix w(options_.units, options_.units);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
    w *= options_.spectral_radius / spectral_radius(w);
    recurrent_.push_back(std::move(w));
  }
  feature_ = ad::Vector::Zero(feature_dim());
}

const ad::Vector& EchoState::step(const ad::Vector& input) {
  if (input.size() != input_dim_)
    throw std::invalid_argument("echo state input dim mismatch");
  const Eigen::Index n = options_.units;
  const double leak = options_.leak;
  ad::Vector drive = input;
  for (Eigen::Index l = 0; l < options_.layers; ++l) {
    auto state = feature_.segment(l * n, n);
    const ad::Vector pre = input_[l] * drive + recurrent_[l] * state;
    state = (1.0 - leak) * state + leak * pre.array().tanh().matrix();
    drive = state;
  }
  return feature_;
}

void EchoState::reset() { feature_.setZero(); }

void EchoState::set_feature(const ad::Vector& feature) {
  if (feature.size() != feature_dim())
    throw std::invalid_argument("echo state feature dim mismatch");
  feature_ = feature;
}

}  // namespace fbff

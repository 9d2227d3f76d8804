#pragma once

#include "fbff/autodiff.hpp"
#include "fbff/distributions.hpp"
#include "fbff/parameter.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fbff {

/// Three fully connected layers; layer normalization and swish after the
/// first two.
class MlpHead {
 public:
  static constexpr Eigen::Index kHidden = 100;

  MlpHead(ParameterSet& params, const std::string& name, Eigen::Index in_dim,
          Eigen::Index out_dim, std::mt19937_64& rng,
          Eigen::Index hidden = kHidden);

  ad::Tensor forward(const ad::Tensor& input) const;

  Eigen::Index in_dim() const { return in_dim_; }
  Eigen::Index out_dim() const { return out_dim_; }
  const std::string& name() const { return name_; }

 private:
  struct Layer {
    Parameter* weight;
    Parameter* bias;
  };
  struct Norm {
    Parameter* gain;
    Parameter* shift;
  };

  std::string name_;
  Eigen::Index in_dim_;
  Eigen::Index out_dim_;
  std::vector<Layer> layers_;
  std::vector<Norm> norms_;
};

struct DistHeadOptions {
  double nu_init = 5.0;
  bool nu_learnable = true;
  double scale_floor = 1e-6;
};

/// MLP emitting a diagonal student-t: loc, softplus(scale), and a per-head
/// learnable dof = 1 + softplus(raw) + 1e-3.
class DistHead {
 public:
  DistHead(ParameterSet& params, const std::string& name, Eigen::Index in_dim,
           Eigen::Index out_dim, std::mt19937_64& rng,
           const DistHeadOptions& options = {});

  StudentTDiag forward(const ad::Tensor& input) const;
  Eigen::Index out_dim() const { return out_dim_; }
  const MlpHead& body() const { return body_; }
  /// Current dof; it does not depend on the input.
  double dof() const;

  static double dof_from_raw(double raw);
  static double raw_from_dof(double nu);

 private:
  MlpHead body_;
  Eigen::Index out_dim_;
  Parameter* nu_raw_;
  DistHeadOptions options_;
};

struct EchoStateOptions {
  Eigen::Index layers = 3;
  Eigen::Index units = 100;
  double spectral_radius = 0.5;
  double leak = 1.0;
  double input_scale = 0.1;
  std::uint64_t seed = 0;
};

/// Deep echo state network: stacked fixed random reservoirs. Layer k is
/// driven by the state of layer k-1; the feature is the concatenation of all
/// layer states. Nothing here is trainable.
class EchoState {
 public:
  EchoState(Eigen::Index input_dim, const EchoStateOptions& options);

  /// Advances every layer once and returns the new feature.
  const ad::Vector& step(const ad::Vector& input);
  void reset();

  const ad::Vector& feature() const { return feature_; }
  Eigen::Index feature_dim() const { return options_.layers * options_.units; }
  Eigen::Index input_dim() const { return input_dim_; }
  const EchoStateOptions& options() const { return options_; }
  const ad::Matrix& recurrent(Eigen::Index layer) const { return recurrent_[layer]; }
  const ad::Matrix& input_weights(Eigen::Index layer) const { return input_[layer]; }

  /// Overwrites the current layer states (feature layout).
  void set_feature(const ad::Vector& feature);

 private:
  Eigen::Index input_dim_;
  EchoStateOptions options_;
  std::vector<ad::Matrix> input_;
  std::vector<ad::Matrix> recurrent_;
  ad::Vector feature_;
};

/// Largest eigenvalue modulus.
double spectral_radius(const ad::Matrix& m);

}  // namespace fbff

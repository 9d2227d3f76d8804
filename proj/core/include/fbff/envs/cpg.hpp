#pragma once

#include "fbff/envs/environment.hpp"

#include <numbers>
#include <string>

namespace fbff::envs {

/// Which oscillators j enter the coupling sum of oscillator i.
enum class CouplingTopology {
  kChain,          // nearest neighbours i-1 and i+1
  kAllToAll,       // every other oscillator
  kDirectedChain,  // predecessor i-1 only; oscillator 0 is the pacemaker
};

CouplingTopology parse_topology(const std::string& text);
std::string to_string(CouplingTopology topology);

struct CpgParams {
  int oscillators = 8;
  double alpha = 2.0;
  double u_r = 10.0;
  double u_eta = 1.0;
  double u_amp = std::numbers::pi / 4.0;
  double dt = 0.02;
  CouplingTopology topology = CouplingTopology::kChain;
};

/// Phase oscillators zeta_i += {u_r + sum_j alpha (zeta_j - zeta_i - u_eta)} dt
/// with sine output theta_i = u_amp sin(zeta_i).
class Cpg {
 public:
  explicit Cpg(CpgParams params = {});

  /// Advances the phases one dt and returns the new joint references.
  const Vector& step();
  void reset();

  const Vector& phases() const { return zeta_; }
  const Vector& references() const { return theta_; }
  void set_phases(const Vector& zeta);
  const CpgParams& params() const { return params_; }

 private:
  CpgParams params_;
  Vector zeta_;
  Vector theta_;
};

}  // namespace fbff::envs

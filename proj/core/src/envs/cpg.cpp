#include "fbff/envs/cpg.hpp"

#include <cmath>
#include <stdexcept>

namespace fbff::envs {

CouplingTopology parse_topology(const std::string& text) {
  if (text == "chain") return CouplingTopology::kChain;
  if (text == "all") return CouplingTopology::kAllToAll;
  if (text == "directed") return CouplingTopology::kDirectedChain;
  throw std::invalid_argument("unknown CPG topology '" + text + "'");
}

std::string to_string(CouplingTopology topology) {
  switch (topology) {
    case CouplingTopology::kChain: return "chain";
    case CouplingTopology::kAllToAll: return "all";
    case CouplingTopology::kDirectedChain: return "directed";
  }
  return "chain";
}

Cpg::Cpg(CpgParams params) : params_(params) {
  if (params_.oscillators < 1) throw std::invalid_argument("CPG needs oscillators");
  reset();
}

void Cpg::reset() {
  zeta_ = Vector::Zero(params_.oscillators);
  theta_ = Vector::Zero(params_.oscillators);
}

void Cpg::set_phases(const Vector& zeta) {
  if (zeta.size() != params_.oscillators) throw std::invalid_argument("CPG phase size mismatch");
  zeta_ = zeta;
  theta_ = params_.u_amp * zeta_.array().sin();
}

const Vector& Cpg::step() {
  const int n = params_.oscillators;
  const double a = params_.alpha;
  Vector rate = Vector::Constant(n, params_.u_r);
  auto couple = [&](int i, int j) { rate(i) += a * (zeta_(j) - zeta_(i) - params_.u_eta); };
  for (int i = 0; i < n; ++i) {
    switch (params_.topology) {
      case CouplingTopology::kChain:
        if (i > 0) couple(i, i - 1);
        if (i + 1 < n) couple(i, i + 1);
        break;
      case CouplingTopology::kAllToAll:
        for (int j = 0; j < n; ++j)
          if (j != i) couple(i, j);
        break;
      case CouplingTopology::kDirectedChain:
        if (i > 0) couple(i, i - 1);
        break;
    }
  }
  zeta_ += rate * params_.dt;
  theta_ = params_.u_amp * zeta_.array().sin();
  return theta_;
}

}  // namespace fbff::envs

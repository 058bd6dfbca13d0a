#pragma once

#include <utility>
#include <vector>

#include "dnas/discretize.hpp"
#include "dnas/search_space.hpp"

namespace dnas {

struct ProximityConfig {
  double rho_p = 0.1;
  bool squared = false;        // default keeps the plain (unsquared) norm
  double kink_epsilon = 1e-12; // below this distance the pull is defined as zero
};

// Linear coefficient ramp, clamped to 1 past the horizon (with a warning).
double ramp_c(long index, long horizon);

// (c * rho / 2) * ||a - P(a)||  (or the squared variant). Zero exactly when
// the activated point is already a member.
double proximity_penalty(const ActivatedAlpha& act, const CellSpace& space, double c,
                         const ProximityConfig& cfg);

// Gradient of the penalty w.r.t. raw alpha. The projection is held constant
// (it is piecewise constant in alpha), the activated-space pull is
// d / ||d||, and the result is chained through the activation.
std::vector<Tensor> proximity_grad(const AlphaStore& store, const CellSpace& space, double c,
                                   const ProximityConfig& cfg);

struct AdmmConfig {
  double rho_a = 0.1;
  double lambda_u = 0.8;
  int period = 10;  // alpha-steps between z/u refreshes
};

// Splitting state in activated-alpha space. z is always a member of the
// constraint set after the first refresh; u is the decayed running residual.
struct AdmmState {
  AdmmConfig cfg;
  std::vector<std::vector<double>> z, u;  // per cell type, flat

  static AdmmState init(const AlphaStore& store, const CellSpace& space, AdmmConfig cfg);
};

// (rho/2) ||a - z + u||^2 and its exact gradient w.r.t. raw alpha.
std::pair<double, std::vector<Tensor>> admm_penalty(const AlphaStore& store, const AdmmState& st);

// z <- P(a + u); u <- lambda_u * u + a - z
void admm_update_zu(AdmmState& st, const ActivatedAlpha& act, const CellSpace& space);

}  // namespace dnas

#include "dnas/regularize.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace dnas {

double ramp_c(long index, long horizon) {
  if (index < 0) throw std::runtime_error("ramp_c: negative index");
  if (horizon < 1) throw std::runtime_error("ramp_c: horizon must be >= 1");
  if (index > horizon) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
      std::cerr << "ramp_c: index passed the horizon, clamping the coefficient to 1\n";
    return 1.0;
  }
  return static_cast<double>(index) / static_cast<double>(horizon);
}

double proximity_penalty(const ActivatedAlpha& act, const CellSpace& space, double c,
                         const ProximityConfig& cfg) {
  double d = distance_to_S(act, space);
  double base = cfg.squared ? d * d : d;
  return 0.5 * c * cfg.rho_p * base;
}

std::vector<Tensor> proximity_grad(const AlphaStore& store, const CellSpace& space, double c,
                                   const ProximityConfig& cfg) {
  ActivatedAlpha act = activate_alpha(store);
  DiscreteArchitecture proj = project_to_S(act, space);
  double sq = 0;
  std::vector<Tensor> diff;
  for (size_t t = 0; t < act.size(); ++t) {
    Tensor d = act[t];
    for (long i = 0; i < d.numel(); ++i) {
      d.data[i] -= proj.s[t][i];
      sq += d.data[i] * d.data[i];
    }
    diff.push_back(std::move(d));
  }
  double norm = std::sqrt(sq);
  std::vector<Tensor> g_act;
  for (size_t t = 0; t < diff.size(); ++t) {
    Tensor g = Tensor::zeros(diff[t].shape);
    if (cfg.squared) {
      // d/da of (c rho / 2) ||d||^2
      for (long i = 0; i < g.numel(); ++i) g.data[i] = c * cfg.rho_p * diff[t].data[i];
    } else if (norm >= cfg.kink_epsilon) {
      double scale = 0.5 * c * cfg.rho_p / norm;
      for (long i = 0; i < g.numel(); ++i) g.data[i] = scale * diff[t].data[i];
    }
    g_act.push_back(std::move(g));
  }
  return chain_through_activation(store, g_act);
}

AdmmState AdmmState::init(const AlphaStore& store, const CellSpace& space, AdmmConfig cfg) {
  if (cfg.rho_a < 0) throw std::runtime_error("admm: rho must be non-negative");
  if (cfg.lambda_u < 0 || cfg.lambda_u > 1)
    throw std::runtime_error("admm: the residual decay must be in [0, 1]");
  if (cfg.period < 1) throw std::runtime_error("admm: update period must be >= 1");
  AdmmState st;
  st.cfg = cfg;
  ActivatedAlpha act = activate_alpha(store);
  for (const Tensor& a : act) {
    st.z.push_back(project_vector(a.data, space));
    st.u.emplace_back(a.data.size(), 0.0);
  }
  return st;
}

std::pair<double, std::vector<Tensor>> admm_penalty(const AlphaStore& store,
                                                    const AdmmState& st) {
  ActivatedAlpha act = activate_alpha(store);
  if (act.size() != st.z.size()) throw std::runtime_error("admm_penalty: state size mismatch");
  double value = 0;
  std::vector<Tensor> g_act;
  for (size_t t = 0; t < act.size(); ++t) {
    if (act[t].data.size() != st.z[t].size())
      throw std::runtime_error("admm_penalty: state does not match this space");
    Tensor g = Tensor::zeros(act[t].shape);
    for (long i = 0; i < act[t].numel(); ++i) {
      double resid = act[t].data[i] - st.z[t][i] + st.u[t][i];
      value += 0.5 * st.cfg.rho_a * resid * resid;
      g.data[i] = st.cfg.rho_a * resid;
    }
    g_act.push_back(std::move(g));
  }
  return {value, chain_through_activation(store, g_act)};
}

void admm_update_zu(AdmmState& st, const ActivatedAlpha& act, const CellSpace& space) {
  if (act.size() != st.z.size()) throw std::runtime_error("admm_update_zu: state size mismatch");
  for (size_t t = 0; t < act.size(); ++t) {
    std::vector<double> shifted(act[t].data.size());
    for (size_t i = 0; i < shifted.size(); ++i) shifted[i] = act[t].data[i] + st.u[t][i];
    st.z[t] = project_vector(shifted, space);
    for (size_t i = 0; i < shifted.size(); ++i)
      st.u[t][i] = st.cfg.lambda_u * st.u[t][i] + act[t].data[i] - st.z[t][i];
  }
}

}  // namespace dnas

#include "dnas/fimt.hpp"

#include <cmath>

namespace dnas {

void SchedulerConfig::validate() const {
  if (kind == ScheduleKind::constant && k < 1)
    throw std::runtime_error("scheduler: constant period must be >= 1");
  if (h0 <= 0) throw std::runtime_error("scheduler: h0 must be positive");
  if (h_i < 1) throw std::runtime_error("scheduler: h_i must be >= 1");
  if (!(lambda > 0) || lambda > 1)
    throw std::runtime_error("scheduler: lambda must be in (0, 1]");
  if (r < 1) throw std::runtime_error("scheduler: r must be >= 1");
}

int SchedulerConfig::step_ratio() const {
  switch (kind) {
    case ScheduleKind::alternating: return 1;
    case ScheduleKind::constant: return k;
    case ScheduleKind::dynamic_fimt: return r;
  }
  throw std::runtime_error("scheduler: unknown kind");
}

FimtState FimtState::init(const SchedulerConfig& cfg) {
  cfg.validate();
  FimtState st;
  st.h = cfg.h0;
  st.h_i = cfg.h_i;
  st.h_d = std::pow(cfg.h_i, -static_cast<double>(cfg.r));
  return st;
}

double fimt_trace(const std::vector<double>& grads) {
  double s = 0;
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::runtime_error("fimt_trace: non-finite gradient");
    s += g * g;
  }
  return s;
}

double fimt_trace(const std::vector<ad::Param*>& params) {
  double s = 0;
  for (const ad::Param* p : params)
    for (double g : p->grad.data) {
      if (!std::isfinite(g)) throw std::runtime_error("fimt_trace: non-finite gradient");
      s += g * g;
    }
  return s;
}

double ewma_update(FimtState& st, double trace, double lambda) {
  if (!(lambda > 0) || lambda > 1)
    throw std::runtime_error("ewma_update: lambda must be in (0, 1]");
  if (!std::isfinite(trace) || trace < 0)
    throw std::runtime_error("ewma_update: trace must be finite and non-negative");
  if (!st.ewma_valid) {
    st.ewma = trace;
    st.ewma_valid = true;
  } else {
    st.ewma = lambda * trace + (1.0 - lambda) * st.ewma;
  }
  st.n++;
  return st.ewma;
}

namespace {
constexpr double kHFloor = 1e-300;
constexpr double kHCeil = 1e300;
}  // namespace

bool should_update_alpha(FimtState& st) {
  if (!st.ewma_valid)
    throw std::runtime_error("should_update_alpha: no average yet (run ewma_update first)");
  bool fire = st.ewma < st.h;
  if (fire) {
    st.h = std::max(st.h * st.h_d, kHFloor);
    st.alpha_steps++;
  } else {
    st.h = std::min(st.h * st.h_i, kHCeil);
  }
  return fire;
}

bool schedule_decision(const SchedulerConfig& cfg, FimtState& st, long step_index) {
  st.w_steps++;
  switch (cfg.kind) {
    case ScheduleKind::alternating:
      st.alpha_steps++;
      return true;
    case ScheduleKind::constant: {
      bool fire = (step_index % cfg.k) == cfg.k - 1;
      if (fire) st.alpha_steps++;
      return fire;
    }
    case ScheduleKind::dynamic_fimt:
      return should_update_alpha(st);
  }
  throw std::runtime_error("schedule_decision: unknown kind");
}

}  // namespace dnas

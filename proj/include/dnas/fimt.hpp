#pragma once

#include <vector>

#include "dnas/graph.hpp"

namespace dnas {

enum class ScheduleKind { alternating, constant, dynamic_fimt };

struct SchedulerConfig {
  ScheduleKind kind = ScheduleKind::dynamic_fimt;
  int k = 10;  // period of the constant schedule
  double h0 = 1.0;
  double h_i = 1.05;
  double lambda = 0.2;
  int r = 10;

  void validate() const;
  // w-steps per alpha-step implied by the schedule; drives the data split
  int step_ratio() const;
};

struct FimtState {
  double ewma = 0.0;
  bool ewma_valid = false;  // first trace seeds the average
  double h = 1.0;
  double h_i = 1.0;  // raise factor on a no-fire step
  double h_d = 1.0;  // decrease factor on a fire, h_i^(-r)
  long n = 0;            // minibatches folded into the average
  long w_steps = 0;      // scheduling decisions taken (one per minibatch)
  long alpha_steps = 0;  // decisions that fired

  static FimtState init(const SchedulerConfig& cfg);
};

// Trace of the gradient outer product: the sum of squared entries.
double fimt_trace(const std::vector<double>& grads);
double fimt_trace(const std::vector<ad::Param*>& params);

// F <- lambda * trace + (1 - lambda) * F; the first call seeds F with the
// trace itself. Returns the new average.
double ewma_update(FimtState& st, double trace, double lambda);

// Threshold rule: fire when the average has dropped below h, then lower h by
// h_d; otherwise raise it by h_i. h is kept inside (0, inf) against float
// under/overflow so the walk can always recover.
bool should_update_alpha(FimtState& st);

// One decision per minibatch for any schedule kind.
bool schedule_decision(const SchedulerConfig& cfg, FimtState& st, long step_index);

}  // namespace dnas

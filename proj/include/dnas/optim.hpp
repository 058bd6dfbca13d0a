#pragma once

#include <vector>

#include "dnas/graph.hpp"

namespace dnas {

// Holds hyperparameters plus per-parameter state. Bind the parameter set once;
// the slot buffers are keyed by position in that list.
struct Optimizer {
  enum class Kind { sgd_momentum, adam };
  Kind kind = Kind::sgd_momentum;

  double lr = 0.01;  // acts as lr_max when cosine annealing is on
  double momentum = 0.9;
  double weight_decay = 0.0;

  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool cosine = false;
  double lr_min = 0.0;
  long horizon = 1;

  long step_count = 0;

  std::vector<ad::Param*> params;
  std::vector<Tensor> slot1;  // velocity (sgd) / first moment (adam)
  std::vector<Tensor> slot2;  // second moment (adam)

  void bind(std::vector<ad::Param*> ps);
  double current_lr() const;  // cosine-annealed when enabled, else flat
};

// lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * step / horizon)); step may not
// exceed the horizon.
double cosine_lr(long step, double lr_max, double lr_min, long horizon);

// v <- mu v + g; p <- p - lr v. Weight decay is added to g first and never
// written back into the gradient buffer.
void sgd_momentum_step(Optimizer& opt);

// Bias-corrected Adam, weight decay added to g first.
void adam_step(Optimizer& opt);

// Scales every gradient down so the global l2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const std::vector<ad::Param*>& params, double max_norm);

}  // namespace dnas

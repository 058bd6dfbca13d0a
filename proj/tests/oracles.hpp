#pragma once

// Shared numeric helpers for the test binaries: tolerance comparison and
// central-difference gradient checking against scalar objectives.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dnas/graph.hpp"
#include "dnas/tensor.hpp"

namespace testutil {

inline bool close(double a, double b, double rtol = 1e-6, double atol = 1e-9) {
  return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

// d f / d x by symmetric difference, restoring *x afterwards.
inline double central_diff(const std::function<double()>& f, double* x, double eps = 1e-5) {
  double x0 = *x;
  *x = x0 + eps;
  double fp = f();
  *x = x0 - eps;
  double fm = f();
  *x = x0;
  return (fp - fm) / (2.0 * eps);
}

struct GradMismatch {
  bool ok = true;
  std::string what;
};

// Checks every entry of every listed parameter: runs `loss` once to fill the
// analytic gradients (caller wires that), then compares against central
// differences of `objective`.
inline GradMismatch check_grads(const std::vector<dnas::ad::Param*>& params,
                                const std::function<double()>& objective, double eps = 1e-5,
                                double rtol = 1e-5, double atol = 1e-8) {
  for (dnas::ad::Param* p : params) {
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      double num = central_diff(objective, &p->value.data[i], eps);
      double ana = p->grad.data[i];
      if (!close(ana, num, rtol, atol)) {
        GradMismatch m;
        m.ok = false;
        m.what = p->name + "[" + std::to_string(i) + "]: analytic " + std::to_string(ana) +
                 " vs numeric " + std::to_string(num);
        return m;
      }
    }
  }
  return {};
}

}  // namespace testutil

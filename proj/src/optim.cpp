#include "dnas/optim.hpp"

#include <cmath>

namespace dnas {

void Optimizer::bind(std::vector<ad::Param*> ps) {
  params = std::move(ps);
  slot1.clear();
  slot2.clear();
  for (ad::Param* p : params) {
    slot1.push_back(Tensor::zeros(p->value.shape));
    if (kind == Kind::adam) slot2.push_back(Tensor::zeros(p->value.shape));
  }
  step_count = 0;
}

double Optimizer::current_lr() const {
  if (!cosine) return lr;
  return cosine_lr(step_count, lr, lr_min, horizon);
}

double cosine_lr(long step, double lr_max, double lr_min, long horizon) {
  if (horizon < 1) throw std::runtime_error("cosine_lr: horizon must be >= 1");
  if (step < 0) throw std::runtime_error("cosine_lr: negative step");
  if (step > horizon) throw std::runtime_error("cosine_lr: step beyond horizon");
  double t = static_cast<double>(step) / static_cast<double>(horizon);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
}

void sgd_momentum_step(Optimizer& opt) {
  if (opt.kind != Optimizer::Kind::sgd_momentum)
    throw std::runtime_error("sgd_momentum_step: wrong optimizer kind");
  double lr = opt.current_lr();
  for (size_t i = 0; i < opt.params.size(); ++i) {
    ad::Param& p = *opt.params[i];
    Tensor& v = opt.slot1[i];
    if (!v.same_shape(p.grad)) throw std::runtime_error("sgd_momentum_step: shape mismatch");
    for (size_t k = 0; k < v.data.size(); ++k) {
      double g = p.grad.data[k] + opt.weight_decay * p.value.data[k];
      v.data[k] = opt.momentum * v.data[k] + g;
      p.value.data[k] -= lr * v.data[k];
    }
    check_finite(p.value, "sgd_momentum_step");
  }
  opt.step_count++;
}

void adam_step(Optimizer& opt) {
  if (opt.kind != Optimizer::Kind::adam)
    throw std::runtime_error("adam_step: wrong optimizer kind");
  double lr = opt.current_lr();
  long t = opt.step_count + 1;
  double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (size_t i = 0; i < opt.params.size(); ++i) {
    ad::Param& p = *opt.params[i];
    Tensor& m = opt.slot1[i];
    Tensor& v = opt.slot2[i];
    if (!m.same_shape(p.grad)) throw std::runtime_error("adam_step: shape mismatch");
    for (size_t k = 0; k < m.data.size(); ++k) {
      double g = p.grad.data[k] + opt.weight_decay * p.value.data[k];
      m.data[k] = opt.beta1 * m.data[k] + (1.0 - opt.beta1) * g;
      v.data[k] = opt.beta2 * v.data[k] + (1.0 - opt.beta2) * g * g;
      double mh = m.data[k] / bc1;
      double vh = v.data[k] / bc2;
      p.value.data[k] -= lr * mh / (std::sqrt(vh) + opt.eps);
    }
    check_finite(p.value, "adam_step");
  }
  opt.step_count++;
}

double clip_grad_norm(const std::vector<ad::Param*>& params, double max_norm) {
  if (!(max_norm > 0)) throw std::runtime_error("clip_grad_norm: max_norm must be positive");
  double sq = 0;
  for (const ad::Param* p : params)
    for (double g : p->grad.data) sq += g * g;
  if (!std::isfinite(sq)) throw std::runtime_error("clip_grad_norm: non-finite gradient");
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double scale = max_norm / norm;
    for (ad::Param* p : params)
      for (double& g : p->grad.data) g *= scale;
  }
  return norm;
}

}  // namespace dnas

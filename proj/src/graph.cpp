#include "dnas/graph.hpp"

#include <algorithm>
#include <cmath>

namespace dnas::ad {

int Graph::push(Tensor value, bool requires_grad, const char* op) {
  check_finite(value, op);
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.op = op;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::gbuf(int idx) {
  Node& n = nodes_[idx];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Graph::check_var(Var v, const char* who) const {
  if (v.idx < 0 || v.idx >= static_cast<int>(nodes_.size()))
    throw std::runtime_error(std::string(who) + ": variable does not belong to this graph");
}

Var Graph::leaf(Param& p) {
  auto it = leaf_cache_.find(&p);
  if (it != leaf_cache_.end()) return {it->second};
  int id = push(p.value, true, "leaf");
  nodes_[id].bound = &p;
  leaf_cache_[&p] = id;
  return {id};
}

Var Graph::input(Tensor t) { return {push(std::move(t), false, "input")}; }

Var Graph::affine(Var x, Var W, Var b) {
  check_var(x, "affine");
  check_var(W, "affine");
  check_var(b, "affine");
  const Tensor& xv = nodes_[x.idx].value;
  const Tensor& wv = nodes_[W.idx].value;
  const Tensor& bv = nodes_[b.idx].value;
  int B = xv.rows(), I = xv.cols(), O = wv.cols();
  if (wv.rows() != I || bv.numel() != O)
    throw std::runtime_error("affine: shape mismatch");
  Tensor y({B, O});
  for (int r = 0; r < B; ++r)
    for (int k = 0; k < I; ++k) {
      double xv_rk = xv.at(r, k);
      for (int c = 0; c < O; ++c) y.at(r, c) += xv_rk * wv.at(k, c);
    }
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < O; ++c) y.at(r, c) += bv.data[c];
  bool rg = wants(x.idx) || wants(W.idx) || wants(b.idx);
  int id = push(std::move(y), rg, "affine");
  if (rg)
    nodes_[id].back = [xi = x.idx, wi = W.idx, bi = b.idx, id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& xv = g.nodes_[xi].value;
      const Tensor& wv = g.nodes_[wi].value;
      int B = xv.rows(), I = xv.cols(), O = wv.cols();
      if (g.wants(xi)) {
        Tensor& gx = g.gbuf(xi);
        for (int r = 0; r < B; ++r)
          for (int c = 0; c < O; ++c) {
            double gy_rc = gy.at(r, c);
            for (int k = 0; k < I; ++k) gx.at(r, k) += gy_rc * wv.at(k, c);
          }
      }
      if (g.wants(wi)) {
        Tensor& gw = g.gbuf(wi);
        for (int r = 0; r < B; ++r)
          for (int k = 0; k < I; ++k) {
            double xv_rk = xv.at(r, k);
            for (int c = 0; c < O; ++c) gw.at(k, c) += xv_rk * gy.at(r, c);
          }
      }
      if (g.wants(bi)) {
        Tensor& gb = g.gbuf(bi);
        for (int r = 0; r < B; ++r)
          for (int c = 0; c < O; ++c) gb.data[c] += gy.at(r, c);
      }
    };
  return {id};
}

Var Graph::relu(Var x) {
  check_var(x, "relu");
  const Tensor& xv = nodes_[x.idx].value;
  Tensor y = xv;
  for (double& v : y.data) v = v > 0 ? v : 0.0;
  bool rg = wants(x.idx);
  int id = push(std::move(y), rg, "relu");
  if (rg)
    nodes_[id].back = [xi = x.idx, id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& xv = g.nodes_[xi].value;
      Tensor& gx = g.gbuf(xi);
      for (size_t i = 0; i < gy.data.size(); ++i)
        if (xv.data[i] > 0) gx.data[i] += gy.data[i];
    };
  return {id};
}

Var Graph::tanh_act(Var x) {
  check_var(x, "tanh");
  Tensor y = nodes_[x.idx].value;
  for (double& v : y.data) v = std::tanh(v);
  bool rg = wants(x.idx);
  int id = push(std::move(y), rg, "tanh");
  if (rg)
    nodes_[id].back = [xi = x.idx, id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& yv = g.nodes_[id].value;
      Tensor& gx = g.gbuf(xi);
      for (size_t i = 0; i < gy.data.size(); ++i)
        gx.data[i] += gy.data[i] * (1.0 - yv.data[i] * yv.data[i]);
    };
  return {id};
}

Var Graph::clipped_relu(Var x, const std::vector<uint8_t>* keep) {
  check_var(x, "clipped_relu");
  const Tensor& xv = nodes_[x.idx].value;
  if (keep && keep->size() != xv.data.size())
    throw std::runtime_error("clipped_relu: mask size mismatch");
  Tensor y = xv;
  for (size_t i = 0; i < y.data.size(); ++i) {
    if (keep && !(*keep)[i]) {
      y.data[i] = 0.0;
      continue;
    }
    y.data[i] = std::min(std::max(y.data[i], 0.0), 1.0);
  }
  bool rg = wants(x.idx);
  std::vector<uint8_t> mask;
  if (keep) mask = *keep;
  int id = push(std::move(y), rg, "clipped_relu");
  if (rg)
    nodes_[id].back = [xi = x.idx, id, mask = std::move(mask)](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& xv = g.nodes_[xi].value;
      Tensor& gx = g.gbuf(xi);
      for (size_t i = 0; i < gy.data.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        if (xv.data[i] > 0 && xv.data[i] < 1) gx.data[i] += gy.data[i];
      }
    };
  return {id};
}

Var Graph::softmax_rows(Var x) {
  check_var(x, "softmax_rows");
  const Tensor& xv = nodes_[x.idx].value;
  int R = xv.rows(), C = xv.cols();
  if (C < 1) throw std::runtime_error("softmax_rows: empty rows");
  Tensor y({R, C});
  for (int r = 0; r < R; ++r) {
    double m = xv.at(r, 0);
    for (int c = 1; c < C; ++c) m = std::max(m, xv.at(r, c));
    double z = 0;
    for (int c = 0; c < C; ++c) {
      double e = std::exp(xv.at(r, c) - m);
      y.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < C; ++c) y.at(r, c) /= z;
  }
  bool rg = wants(x.idx);
  int id = push(std::move(y), rg, "softmax_rows");
  if (rg)
    nodes_[id].back = [xi = x.idx, id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& yv = g.nodes_[id].value;
      Tensor& gx = g.gbuf(xi);
      int R = yv.rows(), C = yv.cols();
      for (int r = 0; r < R; ++r) {
        double s = 0;
        for (int c = 0; c < C; ++c) s += gy.at(r, c) * yv.at(r, c);
        for (int c = 0; c < C; ++c)
          gx.at(r, c) += yv.at(r, c) * (gy.at(r, c) - s);
      }
    };
  return {id};
}

Var Graph::batchnorm_cols(Var x, double eps) {
  check_var(x, "batchnorm_cols");
  const Tensor& xv = nodes_[x.idx].value;
  int B = xv.rows(), C = xv.cols();
  if (B < 1) throw std::runtime_error("batchnorm_cols: empty batch");
  Tensor y({B, C});
  std::vector<double> inv_std(C);
  for (int c = 0; c < C; ++c) {
    double mu = 0;
    for (int r = 0; r < B; ++r) mu += xv.at(r, c);
    mu /= B;
    double var = 0;
    for (int r = 0; r < B; ++r) {
      double d = xv.at(r, c) - mu;
      var += d * d;
    }
    var /= B;
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = is;
    for (int r = 0; r < B; ++r) y.at(r, c) = (xv.at(r, c) - mu) * is;
  }
  bool rg = wants(x.idx);
  int id = push(std::move(y), rg, "batchnorm_cols");
  if (rg)
    nodes_[id].back = [xi = x.idx, id, inv_std = std::move(inv_std)](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& yv = g.nodes_[id].value;
      Tensor& gx = g.gbuf(xi);
      int B = yv.rows(), C = yv.cols();
      for (int c = 0; c < C; ++c) {
        double sg = 0, sgy = 0;
        for (int r = 0; r < B; ++r) {
          sg += gy.at(r, c);
          sgy += gy.at(r, c) * yv.at(r, c);
        }
        for (int r = 0; r < B; ++r)
          gx.at(r, c) += inv_std[c] / B * (B * gy.at(r, c) - sg - yv.at(r, c) * sgy);
      }
    };
  return {id};
}

Var Graph::add(Var a, Var b) {
  check_var(a, "add");
  check_var(b, "add");
  const Tensor& av = nodes_[a.idx].value;
  const Tensor& bv = nodes_[b.idx].value;
  if (!av.same_shape(bv)) throw std::runtime_error("add: shape mismatch");
  Tensor y = av;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv.data[i];
  bool rg = wants(a.idx) || wants(b.idx);
  int id = push(std::move(y), rg, "add");
  if (rg)
    nodes_[id].back = [ai = a.idx, bi = b.idx, id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      if (g.wants(ai)) axpy(1.0, gy, g.gbuf(ai));
      if (g.wants(bi)) axpy(1.0, gy, g.gbuf(bi));
    };
  return {id};
}

Var Graph::scale_elem(Var x, Var s, int flat_index) {
  check_var(x, "scale_elem");
  check_var(s, "scale_elem");
  const Tensor& xv = nodes_[x.idx].value;
  const Tensor& sv = nodes_[s.idx].value;
  if (flat_index < 0 || flat_index >= sv.numel())
    throw std::runtime_error("scale_elem: index out of range");
  double a = sv.data[flat_index];
  Tensor y = xv;
  for (double& v : y.data) v *= a;
  bool rg = wants(x.idx) || wants(s.idx);
  int id = push(std::move(y), rg, "scale_elem");
  if (rg)
    nodes_[id].back = [xi = x.idx, si = s.idx, flat_index, a, id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      const Tensor& xv = g.nodes_[xi].value;
      if (g.wants(xi)) axpy(a, gy, g.gbuf(xi));
      if (g.wants(si)) {
        double acc = 0;
        for (size_t i = 0; i < gy.data.size(); ++i) acc += gy.data[i] * xv.data[i];
        g.gbuf(si).data[flat_index] += acc;
      }
    };
  return {id};
}

Var Graph::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::runtime_error("concat_cols: nothing to concatenate");
  int B = -1, total = 0;
  for (Var v : xs) {
    check_var(v, "concat_cols");
    const Tensor& t = nodes_[v.idx].value;
    if (B == -1) B = t.rows();
    if (t.rows() != B) throw std::runtime_error("concat_cols: row mismatch");
    total += t.cols();
  }
  Tensor y({B, total});
  int off = 0;
  bool rg = false;
  for (Var v : xs) {
    const Tensor& t = nodes_[v.idx].value;
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < t.cols(); ++c) y.at(r, off + c) = t.at(r, c);
    off += t.cols();
    rg = rg || wants(v.idx);
  }
  std::vector<int> ids;
  for (Var v : xs) ids.push_back(v.idx);
  int id = push(std::move(y), rg, "concat_cols");
  if (rg)
    nodes_[id].back = [ids = std::move(ids), id](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      int B = gy.rows();
      int off = 0;
      for (int xi : ids) {
        const Tensor& t = g.nodes_[xi].value;
        if (g.wants(xi)) {
          Tensor& gx = g.gbuf(xi);
          for (int r = 0; r < B; ++r)
            for (int c = 0; c < t.cols(); ++c) gx.at(r, c) += gy.at(r, off + c);
        }
        off += t.cols();
      }
    };
  return {id};
}

Var Graph::fixed_linear(Var x, Tensor A) {
  check_var(x, "fixed_linear");
  const Tensor& xv = nodes_[x.idx].value;
  int B = xv.rows(), I = xv.cols(), O = A.cols();
  if (A.rows() != I) throw std::runtime_error("fixed_linear: shape mismatch");
  Tensor y({B, O});
  for (int r = 0; r < B; ++r)
    for (int k = 0; k < I; ++k) {
      double xv_rk = xv.at(r, k);
      for (int c = 0; c < O; ++c) y.at(r, c) += xv_rk * A.at(k, c);
    }
  bool rg = wants(x.idx);
  int id = push(std::move(y), rg, "fixed_linear");
  if (rg)
    nodes_[id].back = [xi = x.idx, id, A = std::move(A)](Graph& g) {
      const Tensor& gy = g.nodes_[id].grad;
      Tensor& gx = g.gbuf(xi);
      int B = gy.rows(), O = gy.cols(), I = A.rows();
      for (int r = 0; r < B; ++r)
        for (int c = 0; c < O; ++c) {
          double gy_rc = gy.at(r, c);
          for (int k = 0; k < I; ++k) gx.at(r, k) += gy_rc * A.at(k, c);
        }
    };
  return {id};
}

Var Graph::sum_all(Var x) {
  check_var(x, "sum_all");
  const Tensor& xv = nodes_[x.idx].value;
  double s = 0;
  for (double v : xv.data) s += v;
  bool rg = wants(x.idx);
  int id = push(Tensor::scalar(s), rg, "sum_all");
  if (rg)
    nodes_[id].back = [xi = x.idx, id](Graph& g) {
      double gy = g.nodes_[id].grad.data[0];
      Tensor& gx = g.gbuf(xi);
      for (double& v : gx.data) v += gy;
    };
  return {id};
}

Var Graph::weighted_sum(Var x, Tensor weights) {
  check_var(x, "weighted_sum");
  const Tensor& xv = nodes_[x.idx].value;
  if (!xv.same_shape(weights)) throw std::runtime_error("weighted_sum: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < xv.data.size(); ++i) s += xv.data[i] * weights.data[i];
  bool rg = wants(x.idx);
  int id = push(Tensor::scalar(s), rg, "weighted_sum");
  if (rg)
    nodes_[id].back = [xi = x.idx, id, w = std::move(weights)](Graph& g) {
      double gy = g.nodes_[id].grad.data[0];
      Tensor& gx = g.gbuf(xi);
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gy * w.data[i];
    };
  return {id};
}

Var Graph::cross_entropy_mean(Var logits, const std::vector<int>& labels) {
  check_var(logits, "cross_entropy_mean");
  const Tensor& lv = nodes_[logits.idx].value;
  int B = lv.rows(), C = lv.cols();
  if (static_cast<int>(labels.size()) != B)
    throw std::runtime_error("cross_entropy_mean: label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= C) throw std::runtime_error("cross_entropy_mean: label out of range");
  Tensor probs({B, C});
  double loss = 0;
  for (int r = 0; r < B; ++r) {
    double m = lv.at(r, 0);
    for (int c = 1; c < C; ++c) m = std::max(m, lv.at(r, c));
    double z = 0;
    for (int c = 0; c < C; ++c) z += std::exp(lv.at(r, c) - m);
    double logz = m + std::log(z);
    for (int c = 0; c < C; ++c) probs.at(r, c) = std::exp(lv.at(r, c) - logz);
    loss -= (lv.at(r, labels[r]) - logz);
  }
  loss /= B;
  bool rg = wants(logits.idx);
  int id = push(Tensor::scalar(loss), rg, "cross_entropy_mean");
  if (rg)
    nodes_[id].back = [li = logits.idx, id, probs = std::move(probs), labels](Graph& g) {
      double gy = g.nodes_[id].grad.data[0];
      Tensor& gl = g.gbuf(li);
      int B = probs.rows(), C = probs.cols();
      for (int r = 0; r < B; ++r)
        for (int c = 0; c < C; ++c) {
          double p = probs.at(r, c) - (labels[r] == c ? 1.0 : 0.0);
          gl.at(r, c) += gy * p / B;
        }
    };
  return {id};
}

void Graph::backward(Var loss) {
  check_var(loss, "backward");
  if (backward_done_) throw std::runtime_error("backward: already run on this graph");
  Node& ln = nodes_[loss.idx];
  if (ln.value.numel() != 1) throw std::runtime_error("backward: loss must be scalar");
  backward_done_ = true;
  gbuf(loss.idx).data[0] = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.data.empty() || !n.back) continue;
    n.back(*this);
  }
  for (int i = 0; i <= loss.idx; ++i) {
    Node& n = nodes_[i];
    if (n.bound && !n.grad.data.empty()) axpy(1.0, n.grad, n.bound->grad);
  }
}

const Tensor& Graph::value(Var v) const {
  check_var(v, "value");
  return nodes_[v.idx].value;
}

const Tensor& Graph::grad(Var v) const {
  check_var(v, "grad");
  const Node& n = nodes_[v.idx];
  if (n.grad.data.empty())
    throw std::runtime_error("grad: no gradient present (did backward run?)");
  return n.grad;
}

}  // namespace dnas::ad

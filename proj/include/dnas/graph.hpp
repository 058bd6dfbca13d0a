#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dnas/tensor.hpp"

namespace dnas::ad {

// A trainable value with a persistent gradient accumulator. Gradients add up
// across backward passes until zero_grad() is called.
struct Param {
  Tensor value;
  Tensor grad;
  std::string name;

  Param() = default;
  Param(Tensor v, std::string n = "") : value(std::move(v)), name(std::move(n)) {
    grad = Tensor::zeros(value.shape);
  }
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

struct Var {
  int idx = -1;
};

// Define-by-run reverse-mode tape. Ops evaluate eagerly; backward() walks the
// tape once in reverse creation order and accumulates leaf gradients into the
// bound Params. A graph is built per minibatch and thrown away.
class Graph {
 public:
  Var leaf(Param& p);
  Var input(Tensor t);  // constant, no gradient

  // y = x W + b, x:[B,I] W:[I,O] b:[O]
  Var affine(Var x, Var W, Var b);
  Var relu(Var x);
  Var tanh_act(Var x);
  // y = min(max(x, 0), 1); entries where keep[i] == 0 are forced to exactly 0
  Var clipped_relu(Var x, const std::vector<uint8_t>* keep = nullptr);
  Var softmax_rows(Var x);
  // per-column standardization over the batch dimension, no scale/shift
  Var batchnorm_cols(Var x, double eps = 1e-5);
  Var add(Var a, Var b);
  // y = x * s.data[flat_index], gradient flows to both factors
  Var scale_elem(Var x, Var s, int flat_index);
  Var concat_cols(const std::vector<Var>& xs);
  // y = x A with a constant matrix (no gradient for A)
  Var fixed_linear(Var x, Tensor A);
  Var sum_all(Var x);                       // scalar
  Var weighted_sum(Var x, Tensor weights);  // scalar, constant weights
  Var cross_entropy_mean(Var logits, const std::vector<int>& labels);

  void backward(Var loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first touch during backward
    bool requires_grad = false;
    Param* bound = nullptr;
    std::function<void(Graph&)> back;
    const char* op = "leaf";
  };

  std::vector<Node> nodes_;
  std::unordered_map<Param*, int> leaf_cache_;
  bool backward_done_ = false;

  int push(Tensor value, bool requires_grad, const char* op);
  Tensor& gbuf(int idx);
  bool wants(int idx) const { return nodes_[idx].requires_grad; }
  void check_var(Var v, const char* who) const;

  friend struct GraphTestPeek;
};

}  // namespace dnas::ad

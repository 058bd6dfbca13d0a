#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dnas/graph.hpp"
#include "dnas/tensor.hpp"

namespace dnas {

enum class Activation { softmax, crb };

enum class OpKind { none_op, skip, affine_relu, affine_tanh, sep_affine, avg_proj };

const char* op_name(OpKind k);
OpKind op_from_name(const std::string& name);

std::vector<OpKind> default_ops(Activation mode);

struct SearchSpaceConfig {
  int num_input_nodes = 2;
  int num_states = 2;
  std::vector<OpKind> ops;  // empty means default_ops(activation)
  int width = 8;
  int num_cell_types = 2;
  int num_cells = 3;
  Activation activation = Activation::softmax;
  int input_dim = 2;
  int num_classes = 2;

  void validate() const;  // throws on inconsistent settings
  std::vector<OpKind> op_roster() const;
};

// Static layout of one cell: which (state, source) pairs exist and how they
// map to rows of the alpha matrix. Edge rows are ordered by state, then by
// source node index.
struct CellSpace {
  int num_inputs = 2;
  int num_states = 2;
  std::vector<OpKind> ops;
  int none_index = -1;  // -1 when the roster has no "none"
  std::vector<std::pair<int, int>> edges;  // (state, source)

  static CellSpace from(const SearchSpaceConfig& cfg);

  int num_ops() const { return static_cast<int>(ops.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_sources(int state) const { return num_inputs + state; }
  int edge_index(int state, int source) const;
  int flat(int edge, int op) const { return edge * num_ops() + op; }
};

CellSpace make_cell_space(int inputs, int states, std::vector<OpKind> ops);

// Architecture weights for every cell type, plus the CRB prune mask. In
// softmax mode the mask stays all ones.
struct AlphaStore {
  Activation mode = Activation::softmax;
  std::vector<ad::Param> alpha;               // per cell type, shape [E, P]
  std::vector<std::vector<uint8_t>> active;   // per cell type, length E*P

  int num_cell_types() const { return static_cast<int>(alpha.size()); }
};

using ActivatedAlpha = std::vector<Tensor>;  // per cell type, shape [E, P]

// Pure (out-of-graph) activation: row softmax, or unit-clipped relu with the
// prune mask applied.
Tensor activate_rows(const Tensor& raw, Activation mode, const std::vector<uint8_t>* mask);
ActivatedAlpha activate_alpha(const AlphaStore& store);

// Pull a gradient w.r.t. activated alpha back to raw alpha.
std::vector<Tensor> chain_through_activation(const AlphaStore& store,
                                             const std::vector<Tensor>& g_activated);

struct OperatorInstance {
  OpKind kind = OpKind::skip;
  std::vector<ad::Param> params;
};

struct Cell {
  int type = 0;
  std::vector<std::vector<OperatorInstance>> ops;  // [edge][op index]
};

struct Adapter {
  bool identity = true;
  ad::Param W, b;
};

struct Supernet {
  SearchSpaceConfig cfg;
  CellSpace space;
  ad::Param stem_W, stem_b;
  std::vector<Cell> cells;
  std::vector<std::array<Adapter, 2>> adapters;  // per cell: (prev_prev, prev)
  ad::Param head_W, head_b;
  Tensor avg_kernel;  // constant averaging map shared by every avg_proj op

  std::vector<ad::Param*> weight_params();
  long weight_param_count() const;
};

// Seeded initializers shared by the supernet and the discrete evaluation
// network: uniform He-style weights, zero biases.
ad::Param he_uniform_param(Rng& rng, int fan_in, int fan_out, std::string name);
OperatorInstance make_operator(Rng& rng, OpKind kind, int width, const std::string& prefix);
Adapter make_adapter(Rng& rng, int in_width, int out_width, const std::string& prefix);

// Builds the supernetwork and its alpha store. Same seed, same bytes.
std::pair<Supernet, AlphaStore> build_supernet(const SearchSpaceConfig& cfg, uint64_t seed);

// Constant averaging matrix used by avg_proj: each output feature is the mean
// of a 3-wide cyclic window of input features.
Tensor make_avg_kernel(int width);

ad::Var op_forward(ad::Graph& g, const Tensor& avg_kernel, OperatorInstance& op, ad::Var x);

// Weighted sum of operator outputs on one edge. Operators whose activated
// weight is exactly zero in CRB mode are skipped entirely (their gradient is
// zero through the clip either way); "none" contributes nothing in any mode.
ad::Var mixed_edge_forward(ad::Graph& g, const Supernet& net, Cell& cell, int edge, ad::Var x,
                           ad::Var act);

ad::Var cell_forward(ad::Graph& g, const Supernet& net, Cell& cell, ad::Var in0, ad::Var in1,
                     ad::Var act);

struct ForwardOut {
  ad::Var logits;
  std::vector<ad::Var> act;  // activation node per cell type
};

ForwardOut network_forward(ad::Graph& g, Supernet& net, AlphaStore& alpha, const Tensor& X);

}  // namespace dnas

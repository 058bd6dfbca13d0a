#include "dnas/search_space.hpp"

#include <algorithm>
#include <cmath>

namespace dnas {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::none_op: return "none";
    case OpKind::skip: return "skip";
    case OpKind::affine_relu: return "affine_relu";
    case OpKind::affine_tanh: return "affine_tanh";
    case OpKind::sep_affine: return "sep_affine";
    case OpKind::avg_proj: return "avg_proj";
  }
  throw std::runtime_error("op_name: unknown operator");
}

OpKind op_from_name(const std::string& name) {
  for (OpKind k : {OpKind::none_op, OpKind::skip, OpKind::affine_relu, OpKind::affine_tanh,
                   OpKind::sep_affine, OpKind::avg_proj})
    if (name == op_name(k)) return k;
  throw std::runtime_error("op_from_name: unknown operator '" + name + "'");
}

std::vector<OpKind> default_ops(Activation mode) {
  std::vector<OpKind> ops;
  if (mode == Activation::softmax) ops.push_back(OpKind::none_op);
  ops.insert(ops.end(), {OpKind::skip, OpKind::affine_relu, OpKind::affine_tanh,
                         OpKind::sep_affine, OpKind::avg_proj});
  return ops;
}

std::vector<OpKind> SearchSpaceConfig::op_roster() const {
  return ops.empty() ? default_ops(activation) : ops;
}

void SearchSpaceConfig::validate() const {
  if (num_input_nodes != 2)
    throw std::runtime_error(
        "search space: cells consume exactly two predecessor outputs, so num_input_nodes must "
        "be 2");
  if (num_states < 1) throw std::runtime_error("search space: need at least one state");
  if (width < 1) throw std::runtime_error("search space: width must be positive");
  if (num_cell_types != 1 && num_cell_types != 2)
    throw std::runtime_error("search space: cell types must be 1 or 2");
  if (num_cells < 1) throw std::runtime_error("search space: need at least one cell");
  if (input_dim < 1 || num_classes < 2)
    throw std::runtime_error("search space: bad input dim or class count");
  auto roster = op_roster();
  if (roster.empty()) throw std::runtime_error("search space: empty operator roster");
  int nones = 0;
  for (size_t i = 0; i < roster.size(); ++i) {
    if (roster[i] == OpKind::none_op) nones++;
    for (size_t j = i + 1; j < roster.size(); ++j)
      if (roster[i] == roster[j]) throw std::runtime_error("search space: duplicate operator");
  }
  if (activation == Activation::crb && nones > 0)
    throw std::runtime_error("search space: the unit-clipped mode excludes the none operator");
  int non_none = static_cast<int>(roster.size()) - nones;
  if (non_none < 1) throw std::runtime_error("search space: need a selectable operator");
}

CellSpace CellSpace::from(const SearchSpaceConfig& cfg) {
  cfg.validate();
  return make_cell_space(cfg.num_input_nodes, cfg.num_states, cfg.op_roster());
}

CellSpace make_cell_space(int inputs, int states, std::vector<OpKind> ops) {
  if (inputs < 1 || states < 1 || ops.empty())
    throw std::runtime_error("make_cell_space: degenerate layout");
  CellSpace s;
  s.num_inputs = inputs;
  s.num_states = states;
  s.ops = std::move(ops);
  for (size_t p = 0; p < s.ops.size(); ++p)
    if (s.ops[p] == OpKind::none_op) s.none_index = static_cast<int>(p);
  for (int i = 0; i < s.num_states; ++i)
    for (int j = 0; j < s.num_inputs + i; ++j) s.edges.emplace_back(i, j);
  return s;
}

int CellSpace::edge_index(int state, int source) const {
  if (state < 0 || state >= num_states || source < 0 || source >= num_sources(state))
    throw std::runtime_error("edge_index: no such edge");
  int base = 0;
  for (int i = 0; i < state; ++i) base += num_sources(i);
  return base + source;
}

Tensor activate_rows(const Tensor& raw, Activation mode, const std::vector<uint8_t>* mask) {
  Tensor out = raw;
  int R = raw.rows(), C = raw.cols();
  if (mode == Activation::softmax) {
    for (int r = 0; r < R; ++r) {
      double m = raw.at(r, 0);
      for (int c = 1; c < C; ++c) m = std::max(m, raw.at(r, c));
      double z = 0;
      for (int c = 0; c < C; ++c) {
        double e = std::exp(raw.at(r, c) - m);
        out.at(r, c) = e;
        z += e;
      }
      for (int c = 0; c < C; ++c) out.at(r, c) /= z;
    }
    return out;
  }
  for (long i = 0; i < raw.numel(); ++i) {
    if (mask && !(*mask)[i]) {
      out.data[i] = 0.0;
      continue;
    }
    out.data[i] = std::min(std::max(out.data[i], 0.0), 1.0);
  }
  return out;
}

ActivatedAlpha activate_alpha(const AlphaStore& store) {
  ActivatedAlpha act;
  for (int t = 0; t < store.num_cell_types(); ++t)
    act.push_back(activate_rows(store.alpha[t].value, store.mode,
                                store.mode == Activation::crb ? &store.active[t] : nullptr));
  return act;
}

std::vector<Tensor> chain_through_activation(const AlphaStore& store,
                                             const std::vector<Tensor>& g_activated) {
  if (static_cast<int>(g_activated.size()) != store.num_cell_types())
    throw std::runtime_error("chain_through_activation: cell type count mismatch");
  std::vector<Tensor> g_raw;
  for (int t = 0; t < store.num_cell_types(); ++t) {
    const Tensor& raw = store.alpha[t].value;
    const Tensor& g = g_activated[t];
    if (!g.same_shape(raw))
      throw std::runtime_error("chain_through_activation: shape mismatch");
    Tensor out = Tensor::zeros(raw.shape);
    if (store.mode == Activation::softmax) {
      Tensor y = activate_rows(raw, Activation::softmax, nullptr);
      int R = raw.rows(), C = raw.cols();
      for (int r = 0; r < R; ++r) {
        double s = 0;
        for (int c = 0; c < C; ++c) s += g.at(r, c) * y.at(r, c);
        for (int c = 0; c < C; ++c) out.at(r, c) = y.at(r, c) * (g.at(r, c) - s);
      }
    } else {
      const std::vector<uint8_t>& keep = store.active[t];
      for (long i = 0; i < raw.numel(); ++i) {
        if (!keep[i]) continue;
        if (raw.data[i] > 0 && raw.data[i] < 1) out.data[i] = g.data[i];
      }
    }
    g_raw.push_back(std::move(out));
  }
  return g_raw;
}

Tensor make_avg_kernel(int width) {
  Tensor A({width, width});
  for (int o = 0; o < width; ++o)
    for (int d = -1; d <= 1; ++d) A.at(((o + d) % width + width) % width, o) += 1.0 / 3.0;
  return A;
}

ad::Param he_uniform_param(Rng& rng, int fan_in, int fan_out, std::string name) {
  Tensor W({fan_in, fan_out});
  double bound = std::sqrt(6.0 / fan_in);
  for (double& v : W.data) v = rng.uniform(-bound, bound);
  return ad::Param(std::move(W), std::move(name));
}

OperatorInstance make_operator(Rng& rng, OpKind kind, int width, const std::string& prefix) {
  OperatorInstance op;
  op.kind = kind;
  switch (kind) {
    case OpKind::affine_relu:
    case OpKind::affine_tanh:
      op.params.push_back(he_uniform_param(rng, width, width, prefix + ".W"));
      op.params.emplace_back(Tensor::zeros({width}), prefix + ".b");
      break;
    case OpKind::sep_affine:
      op.params.push_back(he_uniform_param(rng, width, width, prefix + ".W1"));
      op.params.emplace_back(Tensor::zeros({width}), prefix + ".b1");
      op.params.push_back(he_uniform_param(rng, width, width, prefix + ".W2"));
      op.params.emplace_back(Tensor::zeros({width}), prefix + ".b2");
      break;
    default:
      break;  // parameter-free
  }
  return op;
}

Adapter make_adapter(Rng& rng, int in_width, int out_width, const std::string& prefix) {
  Adapter a;
  if (in_width == out_width) {
    a.identity = true;
    return a;
  }
  a.identity = false;
  a.W = he_uniform_param(rng, in_width, out_width, prefix + ".W");
  a.b = ad::Param(Tensor::zeros({out_width}), prefix + ".b");
  return a;
}

std::pair<Supernet, AlphaStore> build_supernet(const SearchSpaceConfig& cfg, uint64_t seed) {
  cfg.validate();
  Supernet net;
  net.cfg = cfg;
  net.space = CellSpace::from(cfg);
  net.avg_kernel = make_avg_kernel(cfg.width);

  Rng rng(seed);
  net.stem_W = he_uniform_param(rng, cfg.input_dim, cfg.width, "stem.W");
  net.stem_b = ad::Param(Tensor::zeros({cfg.width}), "stem.b");

  int cell_out_width = cfg.num_states * cfg.width;
  for (int k = 0; k < cfg.num_cells; ++k) {
    // widths of the two incoming tensors at this depth
    int w0 = k >= 2 ? cell_out_width : cfg.width;
    int w1 = k >= 1 ? cell_out_width : cfg.width;
    std::string cp = "cell" + std::to_string(k);
    net.adapters.push_back({make_adapter(rng, w0, cfg.width, cp + ".pre0"),
                            make_adapter(rng, w1, cfg.width, cp + ".pre1")});
    Cell cell;
    cell.type = (cfg.num_cell_types == 2) ? (k % 2) : 0;
    for (int e = 0; e < net.space.num_edges(); ++e) {
      std::vector<OperatorInstance> row;
      for (int p = 0; p < net.space.num_ops(); ++p)
        row.push_back(make_operator(rng, net.space.ops[p], cfg.width,
                              cp + ".e" + std::to_string(e) + ".op" + std::to_string(p)));
      cell.ops.push_back(std::move(row));
    }
    net.cells.push_back(std::move(cell));
  }
  net.head_W = he_uniform_param(rng, cell_out_width, cfg.num_classes, "head.W");
  net.head_b = ad::Param(Tensor::zeros({cfg.num_classes}), "head.b");

  AlphaStore store;
  store.mode = cfg.activation;
  double init = cfg.activation == Activation::crb ? 0.5 : 0.0;
  size_t entries = static_cast<size_t>(net.space.num_edges()) * net.space.num_ops();
  for (int t = 0; t < cfg.num_cell_types; ++t) {
    store.alpha.emplace_back(Tensor({net.space.num_edges(), net.space.num_ops()}, init),
                             "alpha" + std::to_string(t));
    store.active.emplace_back(entries, uint8_t{1});
  }
  return {std::move(net), std::move(store)};
}

std::vector<ad::Param*> Supernet::weight_params() {
  std::vector<ad::Param*> ps;
  ps.push_back(&stem_W);
  ps.push_back(&stem_b);
  for (size_t k = 0; k < cells.size(); ++k) {
    for (Adapter& a : adapters[k])
      if (!a.identity) {
        ps.push_back(&a.W);
        ps.push_back(&a.b);
      }
    for (auto& row : cells[k].ops)
      for (OperatorInstance& op : row)
        for (ad::Param& p : op.params) ps.push_back(&p);
  }
  ps.push_back(&head_W);
  ps.push_back(&head_b);
  return ps;
}

long Supernet::weight_param_count() const {
  long n = 0;
  for (ad::Param* p : const_cast<Supernet*>(this)->weight_params()) n += p->value.numel();
  return n;
}

ad::Var op_forward(ad::Graph& g, const Tensor& avg_kernel, OperatorInstance& op, ad::Var x) {
  switch (op.kind) {
    case OpKind::none_op:
      return g.input(Tensor::zeros(g.value(x).shape));
    case OpKind::skip:
      return x;
    case OpKind::affine_relu:
      return g.relu(g.affine(x, g.leaf(op.params[0]), g.leaf(op.params[1])));
    case OpKind::affine_tanh:
      return g.tanh_act(g.affine(x, g.leaf(op.params[0]), g.leaf(op.params[1])));
    case OpKind::sep_affine: {
      ad::Var h = g.relu(g.affine(x, g.leaf(op.params[0]), g.leaf(op.params[1])));
      return g.relu(g.affine(h, g.leaf(op.params[2]), g.leaf(op.params[3])));
    }
    case OpKind::avg_proj:
      return g.fixed_linear(x, avg_kernel);
  }
  throw std::runtime_error("op_forward: unknown operator");
}

ad::Var mixed_edge_forward(ad::Graph& g, const Supernet& net, Cell& cell, int edge, ad::Var x,
                           ad::Var act) {
  int P = net.space.num_ops();
  // copy this edge's weights up front: growing the graph below reallocates
  // node storage and would invalidate a reference into it
  std::vector<double> w(P);
  {
    const Tensor& a = g.value(act);
    for (int p = 0; p < P; ++p) w[p] = a.data[net.space.flat(edge, p)];
  }
  bool crb = net.cfg.activation == Activation::crb;
  std::vector<ad::Var> terms;
  for (int p = 0; p < P; ++p) {
    if (net.space.ops[p] == OpKind::none_op) continue;
    if (crb && w[p] == 0.0) continue;
    ad::Var out = op_forward(g, net.avg_kernel, cell.ops[edge][p], x);
    terms.push_back(g.scale_elem(out, act, net.space.flat(edge, p)));
  }
  if (terms.empty()) return g.input(Tensor::zeros(g.value(x).shape));
  ad::Var sum = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) sum = g.add(sum, terms[i]);
  return sum;
}

ad::Var cell_forward(ad::Graph& g, const Supernet& net, Cell& cell, ad::Var in0, ad::Var in1,
                     ad::Var act) {
  std::vector<ad::Var> nodes{in0, in1};
  std::vector<ad::Var> states;
  for (int i = 0; i < net.space.num_states; ++i) {
    ad::Var acc{-1};
    for (int j = 0; j < net.space.num_sources(i); ++j) {
      int e = net.space.edge_index(i, j);
      ad::Var term = mixed_edge_forward(g, net, cell, e, nodes[j], act);
      acc = acc.idx < 0 ? term : g.add(acc, term);
    }
    if (net.cfg.activation == Activation::crb) acc = g.batchnorm_cols(acc);
    nodes.push_back(acc);
    states.push_back(acc);
  }
  return g.concat_cols(states);
}

namespace {

ad::Var apply_adapter(ad::Graph& g, Adapter& a, ad::Var x, int want_width) {
  if (a.identity) {
    if (g.value(x).cols() != want_width)
      throw std::runtime_error("adapter: width mismatch on identity adapter");
    return x;
  }
  return g.affine(x, g.leaf(a.W), g.leaf(a.b));
}

}  // namespace

ForwardOut network_forward(ad::Graph& g, Supernet& net, AlphaStore& alpha, const Tensor& X) {
  if (X.cols() != net.cfg.input_dim)
    throw std::runtime_error("network_forward: input dimension mismatch");
  if (alpha.num_cell_types() != net.cfg.num_cell_types)
    throw std::runtime_error("network_forward: alpha store does not match network");
  ForwardOut out;
  for (int t = 0; t < alpha.num_cell_types(); ++t) {
    ad::Var raw = g.leaf(alpha.alpha[t]);
    out.act.push_back(alpha.mode == Activation::softmax
                          ? g.softmax_rows(raw)
                          : g.clipped_relu(raw, &alpha.active[t]));
  }
  ad::Var stem = g.affine(g.input(X), g.leaf(net.stem_W), g.leaf(net.stem_b));
  ad::Var prev_prev = stem, prev = stem;
  for (size_t k = 0; k < net.cells.size(); ++k) {
    ad::Var in0 = apply_adapter(g, net.adapters[k][0], prev_prev, net.cfg.width);
    ad::Var in1 = apply_adapter(g, net.adapters[k][1], prev, net.cfg.width);
    ad::Var cell_out = cell_forward(g, net, net.cells[k], in0, in1, out.act[net.cells[k].type]);
    prev_prev = prev;
    prev = cell_out;
  }
  out.logits = g.affine(prev, g.leaf(net.head_W), g.leaf(net.head_b));
  return out;
}

}  // namespace dnas

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dnas/search_space.hpp"
#include "oracles.hpp"

using namespace dnas;
using testutil::close;

namespace {

SearchSpaceConfig tiny_cfg(Activation mode = Activation::softmax) {
  SearchSpaceConfig cfg;
  cfg.num_states = 2;
  cfg.width = 3;
  cfg.num_cell_types = 2;
  cfg.num_cells = 2;
  cfg.activation = mode;
  cfg.input_dim = 2;
  cfg.num_classes = 2;
  return cfg;
}

std::vector<double> all_param_bytes(Supernet& net) {
  std::vector<double> out;
  for (ad::Param* p : net.weight_params())
    out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  return out;
}

}  // namespace

TEST_CASE("op name round trip") {
  for (OpKind k : {OpKind::none_op, OpKind::skip, OpKind::affine_relu, OpKind::affine_tanh,
                   OpKind::sep_affine, OpKind::avg_proj})
    CHECK(op_from_name(op_name(k)) == k);
  CHECK_THROWS(op_from_name("conv7x7"));
}

TEST_CASE("default rosters") {
  auto soft = default_ops(Activation::softmax);
  REQUIRE(soft.size() == 6);
  CHECK(soft[0] == OpKind::none_op);
  auto crb = default_ops(Activation::crb);
  CHECK(crb.size() == 5);
  for (OpKind k : crb) CHECK(k != OpKind::none_op);
}

TEST_CASE("config validation") {
  SearchSpaceConfig cfg = tiny_cfg();
  CHECK_NOTHROW(cfg.validate());

  SearchSpaceConfig bad = cfg;
  bad.num_input_nodes = 3;  // cells consume exactly two predecessor outputs
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.num_states = 0;
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.num_cell_types = 3;
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.activation = Activation::crb;
  bad.ops = {OpKind::none_op, OpKind::skip};  // none is not allowed under crb
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.ops = {OpKind::skip, OpKind::skip};  // duplicates
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.ops = {OpKind::none_op};  // nothing selectable
  CHECK_THROWS(bad.validate());
}

TEST_CASE("cell space layout") {
  CellSpace sp = make_cell_space(2, 3, default_ops(Activation::softmax));
  CHECK(sp.num_edges() == 2 + 3 + 4);
  CHECK(sp.num_sources(0) == 2);
  CHECK(sp.num_sources(2) == 4);
  CHECK(sp.edge_index(0, 0) == 0);
  CHECK(sp.edge_index(1, 0) == 2);
  CHECK(sp.edge_index(2, 3) == 8);
  CHECK(sp.flat(3, 2) == 3 * sp.num_ops() + 2);
}

TEST_CASE("build is deterministic in the seed") {
  SearchSpaceConfig cfg = tiny_cfg();
  auto a = build_supernet(cfg, 7);
  auto b = build_supernet(cfg, 7);
  auto c = build_supernet(cfg, 8);
  CHECK(all_param_bytes(a.first) == all_param_bytes(b.first));
  CHECK(all_param_bytes(a.first) != all_param_bytes(c.first));

  // alpha starts flat in softmax mode
  for (const auto& ap : a.second.alpha)
    for (double v : ap.value.data) CHECK(v == 0.0);
  // and at one half under crb
  auto d = build_supernet(tiny_cfg(Activation::crb), 7);
  for (const auto& ap : d.second.alpha)
    for (double v : ap.value.data) CHECK(v == 0.5);
  for (const auto& mask : d.second.active)
    for (uint8_t m : mask) CHECK(m == 1);
}

TEST_CASE("weight parameter count matches the listed params") {
  SearchSpaceConfig cfg = tiny_cfg();
  auto built = build_supernet(cfg, 3);
  long listed = 0;
  for (ad::Param* p : built.first.weight_params()) listed += p->value.numel();
  CHECK(listed == built.first.weight_param_count());

  // hand count for this shape: width 3, input 2, classes 2, 2 states, 2 cells.
  // stem 2*3+3 = 9, head 6*2+2 = 14.
  // per cell edges: 5 edges * (relu 12 + tanh 12 + sep 24) = 5*48 = 240.
  // adapters: cell0 (3->3, 3->3) identity, cell1 pre0 3->3 identity,
  // pre1 6->3 = 21.
  CHECK(built.first.weight_param_count() == 9 + 14 + 2 * 240 + 21);
}

TEST_CASE("activate rows softmax and crb") {
  Tensor raw = Tensor::from({2, 3}, {0.0, 1.0, -1.0, 2.0, 2.0, 2.0});
  Tensor sm = activate_rows(raw, Activation::softmax, nullptr);
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int c = 0; c < 3; ++c) s += sm.at(r, c);
    CHECK(close(s, 1.0, 1e-12, 1e-12));
  }
  double e0 = std::exp(0.0) + std::exp(1.0) + std::exp(-1.0);
  CHECK(close(sm.at(0, 1), std::exp(1.0) / e0, 1e-12, 1e-12));

  Tensor craw = Tensor::from({2, 3}, {-0.5, 0.25, 1.5, 0.8, 0.2, 0.6});
  std::vector<uint8_t> mask{1, 1, 1, 1, 0, 1};
  Tensor cv = activate_rows(craw, Activation::crb, &mask);
  CHECK(cv.at(0, 0) == 0.0);
  CHECK(cv.at(0, 1) == 0.25);
  CHECK(cv.at(0, 2) == 1.0);
  CHECK(cv.at(1, 1) == 0.0);  // masked
}

TEST_CASE("chain through activation matches numeric jacobian") {
  for (Activation mode : {Activation::softmax, Activation::crb}) {
    SearchSpaceConfig cfg = tiny_cfg(mode);
    auto built = build_supernet(cfg, 21);
    AlphaStore& store = built.second;
    Rng rng(5);
    for (auto& ap : store.alpha)
      for (double& v : ap.value.data) v = mode == Activation::crb ? rng.uniform(0.05, 0.95)
                                                                  : rng.normal();
    std::vector<Tensor> w;
    for (auto& ap : store.alpha) {
      Tensor t(ap.value.shape);
      for (double& v : t.data) v = rng.normal();
      w.push_back(t);
    }
    auto objective = [&] {
      double s = 0;
      ActivatedAlpha act = activate_alpha(store);
      for (size_t t = 0; t < act.size(); ++t) s += dot(act[t], w[t]);
      return s;
    };
    std::vector<Tensor> chained = chain_through_activation(store, w);
    for (size_t t = 0; t < store.alpha.size(); ++t) {
      for (size_t i = 0; i < store.alpha[t].value.data.size(); ++i) {
        double num = testutil::central_diff(objective, &store.alpha[t].value.data[i]);
        INFO("mode ", static_cast<int>(mode), " type ", t, " entry ", i);
        CHECK(close(chained[t].data[i], num, 1e-6, 1e-8));
      }
    }
  }
}

TEST_CASE("avg kernel is a cyclic three-window mean") {
  Tensor A = make_avg_kernel(4);
  // column o holds weight 1/3 at rows o-1, o, o+1 cyclically
  for (int o = 0; o < 4; ++o) {
    double s = 0;
    for (int r = 0; r < 4; ++r) s += A.at(r, o);
    CHECK(close(s, 1.0, 1e-12, 1e-12));
  }
  ad::Graph g;
  ad::Var x = g.input(Tensor::from({1, 4}, {4.0, 8.0, 12.0, 16.0}));
  const Tensor& y = g.value(g.fixed_linear(x, A));
  CHECK(close(y.at(0, 0), (16 + 4 + 8) / 3.0, 1e-12, 1e-12));
  CHECK(close(y.at(0, 2), (8 + 12 + 16) / 3.0, 1e-12, 1e-12));
}

TEST_CASE("network forward shape, determinism, and gradient flow") {
  SearchSpaceConfig cfg = tiny_cfg();
  auto built = build_supernet(cfg, 31);
  Supernet& net = built.first;
  AlphaStore& alpha = built.second;
  Rng rng(4);
  Tensor X({5, 2});
  for (double& v : X.data) v = rng.normal();

  ad::Graph g;
  ForwardOut fw = network_forward(g, net, alpha, X);
  const Tensor& logits = g.value(fw.logits);
  CHECK(logits.rows() == 5);
  CHECK(logits.cols() == 2);

  ad::Graph g2;
  ForwardOut fw2 = network_forward(g2, net, alpha, X);
  CHECK(g.value(fw.logits).data == g2.value(fw2.logits).data);

  for (ad::Param* p : net.weight_params()) p->zero_grad();
  for (auto& ap : alpha.alpha) ap.zero_grad();
  g.backward(g.cross_entropy_mean(fw.logits, {0, 1, 0, 1, 0}));
  double asum = 0;
  for (auto& ap : alpha.alpha)
    for (double v : ap.grad.data) asum += std::abs(v);
  CHECK(asum > 0);
  double wsum = 0;
  for (ad::Param* p : net.weight_params())
    for (double v : p->grad.data) wsum += std::abs(v);
  CHECK(wsum > 0);
}

TEST_CASE("full network gradient check on a small softmax supernet") {
  SearchSpaceConfig cfg = tiny_cfg();
  cfg.num_cells = 1;
  cfg.num_cell_types = 1;
  auto built = build_supernet(cfg, 41);
  Supernet& net = built.first;
  AlphaStore& alpha = built.second;
  Rng rng(8);
  for (auto& ap : alpha.alpha)
    for (double& v : ap.value.data) v = 0.3 * rng.normal();
  Tensor X({4, 2});
  for (double& v : X.data) v = rng.normal();
  std::vector<int> y{0, 1, 1, 0};

  auto objective = [&] {
    ad::Graph g;
    ForwardOut fw = network_forward(g, net, alpha, X);
    return g.value(g.cross_entropy_mean(fw.logits, y)).data[0];
  };
  for (ad::Param* p : net.weight_params()) p->zero_grad();
  for (auto& ap : alpha.alpha) ap.zero_grad();
  {
    ad::Graph g;
    ForwardOut fw = network_forward(g, net, alpha, X);
    g.backward(g.cross_entropy_mean(fw.logits, y));
  }
  std::vector<ad::Param*> all = net.weight_params();
  for (auto& ap : alpha.alpha) all.push_back(&ap);
  auto m = testutil::check_grads(all, objective, 1e-5, 5e-4, 1e-7);
  INFO(m.what);
  CHECK(m.ok);
}

TEST_CASE("crb skips operators with exactly zero activated weight") {
  SearchSpaceConfig cfg = tiny_cfg(Activation::crb);
  cfg.num_cells = 1;
  cfg.num_cell_types = 1;
  auto built = build_supernet(cfg, 51);
  Supernet& net = built.first;
  AlphaStore& alpha = built.second;
  // drive one operator's raw weight negative: activated becomes exactly zero
  alpha.alpha[0].value.at(0, 0) = -0.4;
  Rng rng(6);
  Tensor X({4, 2});
  for (double& v : X.data) v = rng.normal();

  double base;
  {
    ad::Graph g;
    base = g.value(g.sum_all(network_forward(g, net, alpha, X).logits)).data[0];
  }
  // perturbing the skipped operator's own parameters cannot change the output
  Cell& cell = net.cells[0];
  for (ad::Param& p : cell.ops[0][0].params)
    for (double& v : p.value.data) v += 10.0;
  {
    ad::Graph g;
    double after = g.value(g.sum_all(network_forward(g, net, alpha, X).logits)).data[0];
    CHECK(after == base);
  }
}

TEST_CASE("crb cell output columns are batch normalized") {
  SearchSpaceConfig cfg = tiny_cfg(Activation::crb);
  cfg.num_cells = 1;
  cfg.num_cell_types = 1;
  auto built = build_supernet(cfg, 61);
  Supernet& net = built.first;
  AlphaStore& alpha = built.second;
  Rng rng(9);
  Tensor X({8, 3});
  for (double& v : X.data) v = rng.normal();

  ad::Graph g;
  ad::Var act = g.clipped_relu(g.leaf(alpha.alpha[0]), &alpha.active[0]);
  ad::Var in = g.input(X);
  ad::Var out = cell_forward(g, net, net.cells[0], in, in, act);
  const Tensor& v = g.value(out);
  REQUIRE(v.cols() == cfg.num_states * cfg.width);
  for (int c = 0; c < v.cols(); ++c) {
    double m = 0, var = 0;
    for (int r = 0; r < v.rows(); ++r) m += v.at(r, c);
    m /= v.rows();
    for (int r = 0; r < v.rows(); ++r) var += (v.at(r, c) - m) * (v.at(r, c) - m);
    var /= v.rows();
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-2);
  }
}

TEST_CASE("softmax cells have no batchnorm: scaling alpha scales blending only") {
  // the same forward twice must agree; a direct structural probe of the
  // no-batchnorm path is that a supernet with all-equal alpha and identical
  // inputs on both ports stays finite and deterministic at tiny widths
  SearchSpaceConfig cfg = tiny_cfg();
  cfg.num_cells = 1;
  cfg.num_cell_types = 1;
  auto built = build_supernet(cfg, 71);
  Tensor X({2, 2});
  X.at(0, 0) = 1.0;
  X.at(1, 1) = -1.0;
  ad::Graph g;
  ForwardOut fw = network_forward(g, built.first, built.second, X);
  CHECK(all_finite(g.value(fw.logits)));
}

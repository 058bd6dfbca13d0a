#include "dnas/search.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "dnas/fimt.hpp"

namespace dnas {

void SearchConfig::validate() const {
  space.validate();
  scheduler.validate();
  if (epochs < 1) throw std::runtime_error("search: epochs must be >= 1");
  if (batch_size < 1) throw std::runtime_error("search: batch_size must be >= 1");
  if (!(w_lr_max > 0)) throw std::runtime_error("search: w_lr_max must be positive");
  if (w_lr_min < 0 || w_lr_min > w_lr_max)
    throw std::runtime_error("search: w_lr_min must lie in [0, w_lr_max]");
  if (w_momentum < 0 || w_momentum >= 1)
    throw std::runtime_error("search: w_momentum must lie in [0, 1)");
  if (w_weight_decay < 0) throw std::runtime_error("search: w_weight_decay must be >= 0");
  if (alpha_lr < 0) throw std::runtime_error("search: alpha_lr must be >= 0");
  if (alpha_lr_min < 0 || alpha_lr_min > alpha_lr)
    throw std::runtime_error("search: alpha_lr_min must lie in [0, alpha_lr]");
  if (alpha_weight_decay < 0) throw std::runtime_error("search: alpha_weight_decay must be >= 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    throw std::runtime_error("search: adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw std::runtime_error("search: adam_eps must be positive");
  if (reg == RegKind::proximity) {
    if (prox.rho_p < 0) throw std::runtime_error("search: rho_p must be >= 0");
    if (!(prox.kink_epsilon > 0))
      throw std::runtime_error("search: kink_epsilon must be positive");
  }
  if (reg == RegKind::admm) {
    if (admm.rho_a < 0) throw std::runtime_error("search: rho_a must be >= 0");
    if (admm.lambda_u < 0 || admm.lambda_u > 1)
      throw std::runtime_error("search: lambda_u must lie in [0, 1]");
    if (admm.period < 1) throw std::runtime_error("search: admm period must be >= 1");
  }
}

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_g(*v) : std::string(); }

}  // namespace

std::string SearchHistory::csv() const {
  std::string out = "step,epoch,train_loss,trace,ewma,h,fired,c,val_loss,penalty,dist\n";
  for (const StepRecord& r : steps) {
    out += std::to_string(r.step);
    out += ',';
    out += std::to_string(r.epoch);
    out += ',';
    out += fmt_g(r.train_loss);
    out += ',';
    out += fmt_g(r.trace);
    out += ',';
    out += fmt_g(r.ewma);
    out += ',';
    out += fmt_opt(r.h);
    out += ',';
    out += r.fired ? '1' : '0';
    out += ',';
    out += fmt_g(r.c);
    out += ',';
    out += fmt_opt(r.val_loss);
    out += ',';
    out += fmt_opt(r.penalty);
    out += ',';
    out += fmt_opt(r.dist);
    out += '\n';
  }
  return out;
}

void SearchHistory::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << csv();
  if (!f) throw std::runtime_error("failed writing " + path);
}

void SearchHistory::write_snapshots(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  for (const AlphaSnapshot& s : snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "alpha_ep%04d.json", s.epoch);
    std::string path = dir + "/" + name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << snapshot_json(s);
    if (!f) throw std::runtime_error("failed writing " + path);
  }
}

std::string snapshot_json(const AlphaSnapshot& snap) {
  nlohmann::json j;
  j["epoch"] = snap.epoch;
  j["mode"] = snap.mode == Activation::softmax ? "softmax" : "crb";
  j["inputs"] = snap.num_inputs;
  j["states"] = snap.num_states;
  std::vector<std::string> names;
  for (OpKind k : snap.ops) names.emplace_back(op_name(k));
  j["ops"] = names;
  nlohmann::json types = nlohmann::json::array();
  for (size_t t = 0; t < snap.activated.size(); ++t) {
    const Tensor& a = snap.activated[t];
    int E = a.shape[0], P = a.shape[1];
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json mask = nlohmann::json::array();
    for (int e = 0; e < E; ++e) {
      nlohmann::json row = nlohmann::json::array();
      nlohmann::json mrow = nlohmann::json::array();
      for (int p = 0; p < P; ++p) {
        row.push_back(a.at(e, p));
        mrow.push_back(static_cast<int>(snap.active[t][static_cast<size_t>(e) * P + p]));
      }
      rows.push_back(std::move(row));
      mask.push_back(std::move(mrow));
    }
    types.push_back({{"activated", std::move(rows)}, {"active", std::move(mask)}});
  }
  j["cell_types"] = std::move(types);
  return j.dump(2) + "\n";
}

AlphaSnapshot parse_snapshot(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  AlphaSnapshot snap;
  snap.epoch = j.at("epoch").get<int>();
  std::string mode = j.at("mode").get<std::string>();
  if (mode == "softmax")
    snap.mode = Activation::softmax;
  else if (mode == "crb")
    snap.mode = Activation::crb;
  else
    throw std::runtime_error("snapshot: unknown mode " + mode);
  snap.num_inputs = j.at("inputs").get<int>();
  snap.num_states = j.at("states").get<int>();
  if (snap.num_inputs < 1 || snap.num_states < 1)
    throw std::runtime_error("snapshot: bad layout");
  for (const auto& n : j.at("ops")) snap.ops.push_back(op_from_name(n.get<std::string>()));
  int E = 0;
  for (int i = 0; i < snap.num_states; ++i) E += snap.num_inputs + i;
  int P = static_cast<int>(snap.ops.size());
  for (const auto& jt : j.at("cell_types")) {
    const auto& rows = jt.at("activated");
    const auto& mask = jt.at("active");
    if (static_cast<int>(rows.size()) != E || static_cast<int>(mask.size()) != E)
      throw std::runtime_error("snapshot: row count mismatch");
    Tensor a({E, P});
    std::vector<uint8_t> m(static_cast<size_t>(E) * P, 1);
    for (int e = 0; e < E; ++e) {
      if (static_cast<int>(rows[e].size()) != P || static_cast<int>(mask[e].size()) != P)
        throw std::runtime_error("snapshot: column count mismatch");
      for (int p = 0; p < P; ++p) {
        a.at(e, p) = rows[e][p].get<double>();
        m[static_cast<size_t>(e) * P + p] = mask[e][p].get<int>() ? 1 : 0;
      }
    }
    snap.activated.push_back(std::move(a));
    snap.active.push_back(std::move(m));
  }
  if (snap.activated.empty()) throw std::runtime_error("snapshot: no cell types");
  return snap;
}

namespace {

std::pair<Tensor, std::vector<int>> gather_batch(const Dataset& d, const std::vector<int>& order,
                                                 size_t from, int count) {
  int dim = d.X.shape[1];
  Tensor X({count, dim});
  std::vector<int> y(count);
  for (int i = 0; i < count; ++i) {
    int src = order[from + i];
    for (int j = 0; j < dim; ++j) X.at(i, j) = d.X.at(src, j);
    y[i] = d.y[src];
  }
  return {std::move(X), std::move(y)};
}

}  // namespace

WStepOut w_step(Supernet& net, AlphaStore& alpha, const Tensor& X, const std::vector<int>& y,
                Optimizer& wopt) {
  for (ad::Param* p : wopt.params) p->zero_grad();
  for (ad::Param& a : alpha.alpha) a.zero_grad();
  ad::Graph g;
  ForwardOut fw = network_forward(g, net, alpha, X);
  ad::Var loss = g.cross_entropy_mean(fw.logits, y);
  g.backward(loss);
  WStepOut out;
  out.loss = g.value(loss).data[0];
  out.trace = fimt_trace(wopt.params);
  sgd_momentum_step(wopt);
  return out;
}

AlphaStepOut alpha_step(Supernet& net, AlphaStore& alpha, const Tensor& X,
                        const std::vector<int>& y, RegDriver& reg, Optimizer& aopt, double c,
                        const CellSpace& space) {
  for (ad::Param* p : aopt.params) p->zero_grad();
  ad::Graph g;
  ForwardOut fw = network_forward(g, net, alpha, X);
  ad::Var loss = g.cross_entropy_mean(fw.logits, y);
  g.backward(loss);
  AlphaStepOut out;
  out.val_loss = g.value(loss).data[0];

  switch (reg.kind) {
    case RegKind::none:
      break;
    case RegKind::proximity: {
      ActivatedAlpha act = activate_alpha(alpha);
      out.dist = distance_to_S(act, space);
      out.penalty = proximity_penalty(act, space, c, reg.prox);
      // When the coefficient is exactly zero the pull is identically zero;
      // skip the add so the step is bit-identical to an unregularized one.
      if (c * reg.prox.rho_p != 0.0) {
        std::vector<Tensor> gs = proximity_grad(alpha, space, c, reg.prox);
        for (size_t t = 0; t < gs.size(); ++t)
          for (size_t i = 0; i < gs[t].data.size(); ++i)
            alpha.alpha[t].grad.data[i] += gs[t].data[i];
      }
      break;
    }
    case RegKind::admm: {
      if (!reg.admm) throw std::runtime_error("alpha_step: admm state missing");
      auto [pen, gs] = admm_penalty(alpha, *reg.admm);
      out.penalty = pen;
      out.dist = distance_to_S(activate_alpha(alpha), space);
      if (reg.admm->cfg.rho_a != 0.0) {
        for (size_t t = 0; t < gs.size(); ++t)
          for (size_t i = 0; i < gs[t].data.size(); ++i)
            alpha.alpha[t].grad.data[i] += gs[t].data[i];
      }
      break;
    }
  }

  adam_step(aopt);
  if (alpha.mode == Activation::crb) crb_prune_update(alpha);
  return out;
}

namespace {

AlphaSnapshot make_snapshot(int epoch, const Supernet& net, const AlphaStore& alpha) {
  AlphaSnapshot snap;
  snap.epoch = epoch;
  snap.mode = alpha.mode;
  snap.num_inputs = net.space.num_inputs;
  snap.num_states = net.space.num_states;
  snap.ops = net.space.ops;
  snap.activated = activate_alpha(alpha);
  snap.active = alpha.active;
  return snap;
}

SearchResult run_loop(const SearchConfig& cfg, const Dataset& data,
                      const std::function<void(int, Supernet&, AlphaStore&)>& after_epoch) {
  cfg.validate();
  if (data.size() < 2) throw std::runtime_error("search: dataset too small");
  if (data.X.shape[1] != cfg.space.input_dim)
    throw std::runtime_error("search: dataset width does not match input_dim");
  if (data.classes != cfg.space.num_classes)
    throw std::runtime_error("search: dataset classes do not match num_classes");

  Rng master(cfg.seed);
  uint64_t split_seed = master.next_u64();
  uint64_t build_seed = master.next_u64();
  uint64_t train_seed = master.next_u64();
  uint64_t valid_seed = master.next_u64();

  SplitIdx split = split_dataset(data.size(), cfg.scheduler, split_seed);
  auto built = build_supernet(cfg.space, build_seed);
  Supernet& net = built.first;
  AlphaStore& alpha = built.second;

  int bs = cfg.batch_size;
  int n_train = static_cast<int>(split.train.size());
  int steps_per_epoch = n_train / bs;
  if (steps_per_epoch < 1)
    throw std::runtime_error("search: batch size exceeds the training split");
  long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  bool dynamic = cfg.scheduler.kind == ScheduleKind::dynamic_fimt;
  // Ramp and annealing horizon for the architecture side: planned alpha steps
  // for the deterministic schedules, epochs when firing is data-driven.
  long planned_alpha = 1;
  switch (cfg.scheduler.kind) {
    case ScheduleKind::alternating: planned_alpha = total_steps; break;
    case ScheduleKind::constant: planned_alpha = total_steps / cfg.scheduler.k; break;
    case ScheduleKind::dynamic_fimt: planned_alpha = cfg.epochs; break;
  }
  if (planned_alpha < 1) planned_alpha = 1;

  bool crb = cfg.space.activation == Activation::crb;

  Optimizer wopt;
  wopt.kind = Optimizer::Kind::sgd_momentum;
  wopt.lr = cfg.w_lr_max;
  wopt.momentum = cfg.w_momentum;
  wopt.weight_decay = cfg.w_weight_decay;
  wopt.cosine = true;
  wopt.lr_min = cfg.w_lr_min;
  wopt.horizon = total_steps;
  wopt.bind(net.weight_params());

  Optimizer aopt;
  aopt.kind = Optimizer::Kind::adam;
  aopt.lr = cfg.alpha_lr;
  aopt.beta1 = cfg.adam_beta1;
  aopt.beta2 = cfg.adam_beta2;
  aopt.eps = cfg.adam_eps;
  // The concrete-blend protocol freezes the architecture learning rate and
  // drops its weight decay; both only make sense for softmax blending.
  aopt.weight_decay = crb ? 0.0 : cfg.alpha_weight_decay;
  bool anneal_alpha = crb ? false : cfg.alpha_cosine;
  std::vector<ad::Param*> aparams;
  for (ad::Param& a : alpha.alpha) aparams.push_back(&a);
  aopt.bind(std::move(aparams));

  RegDriver reg;
  reg.kind = cfg.reg;
  reg.prox = cfg.prox;
  if (cfg.reg == RegKind::admm) reg.admm = AdmmState::init(alpha, net.space, cfg.admm);

  FimtState fs = FimtState::init(cfg.scheduler);
  Rng train_rng(train_seed);
  Rng valid_rng(valid_seed);
  std::vector<int> train_order = split.train;
  std::vector<int> valid_order = split.valid;
  if (valid_order.empty()) throw std::runtime_error("search: empty validation split");
  valid_rng.shuffle(valid_order);
  size_t vpos = 0;
  int vbs = std::min<int>(bs, static_cast<int>(valid_order.size()));

  SearchHistory hist;
  hist.steps.reserve(static_cast<size_t>(total_steps));
  long step = 0;
  long astep = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    train_rng.shuffle(train_order);
    for (int b = 0; b < steps_per_epoch; ++b) {
      auto batch = gather_batch(data, train_order, static_cast<size_t>(b) * bs, bs);
      WStepOut w = w_step(net, alpha, batch.first, batch.second, wopt);
      ewma_update(fs, w.trace, cfg.scheduler.lambda);

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.train_loss = w.loss;
      rec.trace = w.trace;
      rec.ewma = fs.ewma;
      if (dynamic) rec.h = fs.h;  // threshold the decision below compares against

      bool fired = schedule_decision(cfg.scheduler, fs, step);
      long ridx = dynamic ? epoch : astep;
      long rhor = dynamic ? cfg.epochs : planned_alpha;
      double c = ramp_c(std::min(ridx, rhor), rhor);
      rec.fired = fired;
      rec.c = c;

      if (fired) {
        if (vpos + static_cast<size_t>(vbs) > valid_order.size()) {
          valid_rng.shuffle(valid_order);
          vpos = 0;
        }
        auto vbatch = gather_batch(data, valid_order, vpos, vbs);
        vpos += static_cast<size_t>(vbs);
        aopt.lr = anneal_alpha
                      ? cosine_lr(std::min(ridx, rhor), cfg.alpha_lr, cfg.alpha_lr_min, rhor)
                      : cfg.alpha_lr;
        AlphaStepOut a =
            alpha_step(net, alpha, vbatch.first, vbatch.second, reg, aopt, c, net.space);
        rec.val_loss = a.val_loss;
        rec.penalty = a.penalty;
        rec.dist = a.dist;
        ++astep;
        if (reg.kind == RegKind::admm && astep % reg.admm->cfg.period == 0)
          admm_update_zu(*reg.admm, activate_alpha(alpha), net.space);
      }

      hist.steps.push_back(std::move(rec));
      ++step;
    }
    hist.snapshots.push_back(make_snapshot(epoch + 1, net, alpha));
    if (after_epoch) after_epoch(epoch, net, alpha);
  }

  SearchResult result;
  result.final_activated = activate_alpha(alpha);
  result.final_active = alpha.active;
  result.arch = project_to_S(result.final_activated, net.space);
  result.history = std::move(hist);
  return result;
}

}  // namespace

SearchResult run_search(const SearchConfig& cfg, const Dataset& data) {
  return run_loop(cfg, data, {});
}

ExtendedResult extended_run(const SearchConfig& cfg, const Dataset& data, int checkpoint_every) {
  if (checkpoint_every < 1)
    throw std::runtime_error("extended_run: checkpoint_every must be >= 1");
  ExtendedResult out;
  auto hook = [&](int epoch, Supernet& net, AlphaStore& alpha) {
    if ((epoch + 1) % checkpoint_every == 0) {
      Checkpoint cp;
      cp.epoch = epoch + 1;
      cp.arch = project_to_S(activate_alpha(alpha), net.space);
      out.checkpoints.push_back(std::move(cp));
    }
  };
  SearchResult r = run_loop(cfg, data, hook);
  Checkpoint final_cp;
  final_cp.epoch = cfg.epochs;
  final_cp.arch = r.arch;
  out.checkpoints.push_back(std::move(final_cp));
  out.history = std::move(r.history);
  return out;
}

namespace {

struct ChosenOp {
  int source = 0;
  OperatorInstance op;
};

struct DiscreteCell {
  int type = 0;
  std::vector<std::vector<ChosenOp>> states;
};

struct DiscreteNet {
  SearchSpaceConfig cfg;
  ad::Param stem_W, stem_b;
  std::vector<std::array<Adapter, 2>> adapters;
  std::vector<DiscreteCell> cells;
  ad::Param head_W, head_b;
  Tensor avg_kernel;

  std::vector<ad::Param*> params() {
    std::vector<ad::Param*> out{&stem_W, &stem_b};
    for (size_t k = 0; k < cells.size(); ++k) {
      for (Adapter& a : adapters[k])
        if (!a.identity) {
          out.push_back(&a.W);
          out.push_back(&a.b);
        }
      for (auto& row : cells[k].states)
        for (ChosenOp& co : row)
          for (ad::Param& p : co.op.params) out.push_back(&p);
    }
    out.push_back(&head_W);
    out.push_back(&head_b);
    return out;
  }
};

DiscreteNet build_discrete(const DiscreteArchitecture& arch, const SearchSpaceConfig& cfg,
                           uint64_t seed) {
  cfg.validate();
  CellSpace space = CellSpace::from(cfg);
  if (static_cast<int>(arch.s.size()) != cfg.num_cell_types)
    throw std::runtime_error("discrete build: cell type count mismatch");
  if (!validate_in_S(arch, space))
    throw std::runtime_error("discrete build: architecture violates the constraint set");

  Rng rng(seed);
  DiscreteNet net;
  net.cfg = cfg;
  net.avg_kernel = make_avg_kernel(cfg.width);
  net.stem_W = he_uniform_param(rng, cfg.input_dim, cfg.width, "stem.W");
  net.stem_b = ad::Param(Tensor::zeros({cfg.width}), "stem.b");
  int cell_out = cfg.num_states * cfg.width;
  int P = space.num_ops();
  for (int k = 0; k < cfg.num_cells; ++k) {
    int type = cfg.num_cell_types == 2 ? k % 2 : 0;
    int w0 = k >= 2 ? cell_out : cfg.width;
    int w1 = k >= 1 ? cell_out : cfg.width;
    std::string cp = "cell" + std::to_string(k);
    net.adapters.push_back({make_adapter(rng, w0, cfg.width, cp + ".pre0"),
                            make_adapter(rng, w1, cfg.width, cp + ".pre1")});
    DiscreteCell cell;
    cell.type = type;
    for (int i = 0; i < cfg.num_states; ++i) {
      std::vector<ChosenOp> row;
      for (int j = 0; j < space.num_sources(i); ++j) {
        int e = space.edge_index(i, j);
        for (int p = 0; p < P; ++p) {
          if (arch.s[type][static_cast<size_t>(e) * P + p] != 1.0) continue;
          ChosenOp co;
          co.source = j;
          co.op = make_operator(rng, space.ops[p], cfg.width,
                                cp + ".s" + std::to_string(i) + ".j" + std::to_string(j));
          row.push_back(std::move(co));
        }
      }
      cell.states.push_back(std::move(row));
    }
    net.cells.push_back(std::move(cell));
  }
  net.head_W = he_uniform_param(rng, cell_out, cfg.num_classes, "head.W");
  net.head_b = ad::Param(Tensor::zeros({cfg.num_classes}), "head.b");
  return net;
}

ad::Var apply_adapter(ad::Graph& g, Adapter& a, ad::Var x) {
  if (a.identity) return x;
  return g.affine(x, g.leaf(a.W), g.leaf(a.b));
}

ad::Var forward_discrete(ad::Graph& g, DiscreteNet& net, const Tensor& X) {
  ad::Var h = g.affine(g.input(X), g.leaf(net.stem_W), g.leaf(net.stem_b));
  ad::Var prev_prev = h;
  ad::Var prev = h;
  for (size_t k = 0; k < net.cells.size(); ++k) {
    ad::Var in0 = apply_adapter(g, net.adapters[k][0], prev_prev);
    ad::Var in1 = apply_adapter(g, net.adapters[k][1], prev);
    std::vector<ad::Var> nodes{in0, in1};
    std::vector<ad::Var> states;
    for (auto& row : net.cells[k].states) {
      if (row.empty()) throw std::runtime_error("discrete forward: state with no operators");
      std::optional<ad::Var> acc;
      for (ChosenOp& co : row) {
        ad::Var o = op_forward(g, net.avg_kernel, co.op, nodes[co.source]);
        acc = acc ? g.add(*acc, o) : o;
      }
      nodes.push_back(*acc);
      states.push_back(*acc);
    }
    ad::Var out = g.concat_cols(states);
    prev_prev = prev;
    prev = out;
  }
  return g.affine(prev, g.leaf(net.head_W), g.leaf(net.head_b));
}

}  // namespace

long discrete_param_count(const DiscreteArchitecture& arch, const SearchSpaceConfig& cfg) {
  DiscreteNet net = build_discrete(arch, cfg, 1);
  long n = 0;
  for (ad::Param* p : net.params()) n += static_cast<long>(p->value.data.size());
  return n;
}

EvalResult retrain_discrete(const DiscreteArchitecture& arch, const SearchSpaceConfig& cfg,
                            const Dataset& train, const Dataset& test, const EvalConfig& ecfg) {
  if (ecfg.epochs < 1) throw std::runtime_error("retrain: epochs must be >= 1");
  if (ecfg.batch_size < 1) throw std::runtime_error("retrain: batch_size must be >= 1");
  if (!(ecfg.lr_max > 0)) throw std::runtime_error("retrain: lr_max must be positive");
  if (ecfg.lr_min < 0 || ecfg.lr_min > ecfg.lr_max)
    throw std::runtime_error("retrain: lr_min must lie in [0, lr_max]");
  if (ecfg.momentum < 0 || ecfg.momentum >= 1)
    throw std::runtime_error("retrain: momentum must lie in [0, 1)");
  if (ecfg.weight_decay < 0) throw std::runtime_error("retrain: weight_decay must be >= 0");
  if (ecfg.grad_clip < 0) throw std::runtime_error("retrain: grad_clip must be >= 0");
  if (train.size() < 1 || test.size() < 1)
    throw std::runtime_error("retrain: empty train or test set");
  if (train.X.shape[1] != cfg.input_dim || test.X.shape[1] != cfg.input_dim)
    throw std::runtime_error("retrain: dataset width does not match input_dim");
  if (train.classes != cfg.num_classes)
    throw std::runtime_error("retrain: dataset classes do not match num_classes");

  Rng master(ecfg.seed);
  uint64_t build_seed = master.next_u64();
  uint64_t shuffle_seed = master.next_u64();
  DiscreteNet net = build_discrete(arch, cfg, build_seed);

  int bs = std::min(ecfg.batch_size, train.size());
  int steps_per_epoch = train.size() / bs;
  Optimizer opt;
  opt.kind = Optimizer::Kind::sgd_momentum;
  opt.lr = ecfg.lr_max;
  opt.momentum = ecfg.momentum;
  opt.weight_decay = ecfg.weight_decay;
  opt.cosine = true;
  opt.lr_min = ecfg.lr_min;
  opt.horizon = static_cast<long>(ecfg.epochs) * steps_per_epoch;
  opt.bind(net.params());

  Rng shuf(shuffle_seed);
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double last_epoch_loss = 0;
  for (int e = 0; e < ecfg.epochs; ++e) {
    shuf.shuffle(order);
    double sum = 0;
    for (int b = 0; b < steps_per_epoch; ++b) {
      auto batch = gather_batch(train, order, static_cast<size_t>(b) * bs, bs);
      for (ad::Param* p : opt.params) p->zero_grad();
      ad::Graph g;
      ad::Var logits = forward_discrete(g, net, batch.first);
      ad::Var loss = g.cross_entropy_mean(logits, batch.second);
      g.backward(loss);
      sum += g.value(loss).data[0];
      if (ecfg.grad_clip > 0) clip_grad_norm(opt.params, ecfg.grad_clip);
      sgd_momentum_step(opt);
    }
    last_epoch_loss = sum / steps_per_epoch;
  }

  std::vector<int> ident(test.size());
  std::iota(ident.begin(), ident.end(), 0);
  int wrong = 0;
  const int chunk = 256;
  for (int from = 0; from < test.size(); from += chunk) {
    int count = std::min(chunk, test.size() - from);
    auto batch = gather_batch(test, ident, static_cast<size_t>(from), count);
    ad::Graph g;
    ad::Var logits = forward_discrete(g, net, batch.first);
    const Tensor& L = g.value(logits);
    for (int i = 0; i < count; ++i) {
      int best = 0;
      for (int cls = 1; cls < cfg.num_classes; ++cls)
        if (L.at(i, cls) > L.at(i, best)) best = cls;
      if (best != batch.second[i]) ++wrong;
    }
  }

  EvalResult r;
  r.test_error = static_cast<double>(wrong) / test.size();
  long n = 0;
  for (ad::Param* p : net.params()) n += static_cast<long>(p->value.data.size());
  r.param_count = n;
  r.final_train_loss = last_epoch_loss;
  return r;
}

}  // namespace dnas

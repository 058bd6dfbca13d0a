#include "dnas/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dnas {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double x;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("bad value for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::runtime_error("bad value for " + key + ": " + v);
  return x;
}

long parse_long(const std::string& key, const std::string& v) {
  size_t pos = 0;
  long x;
  try {
    x = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("bad value for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::runtime_error("bad value for " + key + ": " + v);
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_long(key, v));
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  unsigned long long x;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("bad value for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::runtime_error("bad value for " + key + ": " + v);
  return static_cast<uint64_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::runtime_error("bad value for " + key + ": " + v);
}

ScheduleKind parse_schedule(const std::string& v) {
  if (v == "alternating") return ScheduleKind::alternating;
  if (v == "constant") return ScheduleKind::constant;
  if (v == "dynamic") return ScheduleKind::dynamic_fimt;
  throw std::runtime_error("unknown schedule: " + v);
}

RegKind parse_reg(const std::string& v) {
  if (v == "none") return RegKind::none;
  if (v == "proximity") return RegKind::proximity;
  if (v == "admm") return RegKind::admm;
  throw std::runtime_error("unknown regularizer: " + v);
}

Activation parse_activation(const std::string& v) {
  if (v == "softmax") return Activation::softmax;
  if (v == "crb") return Activation::crb;
  throw std::runtime_error("unknown activation: " + v);
}

}  // namespace

KeyValues parse_kv_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + " has no '='");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

KeyValues parse_kv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_kv_text(ss.str());
}

KeyValues parse_kv_items(const std::vector<std::string>& items) {
  KeyValues kv;
  for (const std::string& it : items) {
    size_t eq = it.find('=');
    if (eq == std::string::npos) throw std::runtime_error("expected key=value, got: " + it);
    std::string key = trim(it.substr(0, eq));
    std::string val = trim(it.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("expected key=value, got: " + it);
    kv[key] = val;
  }
  return kv;
}

ExperimentConfig resolve_experiment(const KeyValues& kv) {
  ExperimentConfig e;
  e.kv = kv;
  SearchConfig& s = e.search_template;
  for (const auto& [key, v] : kv) {
    if (key == "arm") e.arm = v;
    else if (key == "dataset") e.dataset.kind = v;
    else if (key == "dataset_size") e.dataset.size = parse_int(key, v);
    else if (key == "dataset_noise") e.dataset.noise = parse_double(key, v);
    else if (key == "dataset_classes") e.dataset.classes = parse_int(key, v);
    else if (key == "dataset_seed") e.dataset.seed = parse_u64(key, v);
    else if (key == "test_fraction") e.test_fraction = parse_double(key, v);
    else if (key == "trials") e.trials = parse_int(key, v);
    else if (key == "seed") e.seed0 = parse_u64(key, v);
    else if (key == "threads") e.threads = parse_int(key, v);
    else if (key == "random_baseline") e.random_baseline = parse_int(key, v);
    else if (key == "states") s.space.num_states = parse_int(key, v);
    else if (key == "width") s.space.width = parse_int(key, v);
    else if (key == "cells") s.space.num_cells = parse_int(key, v);
    else if (key == "cell_types") s.space.num_cell_types = parse_int(key, v);
    else if (key == "activation") s.space.activation = parse_activation(v);
    else if (key == "schedule") s.scheduler.kind = parse_schedule(v);
    else if (key == "k") s.scheduler.k = parse_int(key, v);
    else if (key == "h0") s.scheduler.h0 = parse_double(key, v);
    else if (key == "h_i") s.scheduler.h_i = parse_double(key, v);
    else if (key == "lambda") s.scheduler.lambda = parse_double(key, v);
    else if (key == "r") s.scheduler.r = parse_int(key, v);
    else if (key == "regularizer") s.reg = parse_reg(v);
    else if (key == "rho_p") s.prox.rho_p = parse_double(key, v);
    else if (key == "squared") s.prox.squared = parse_bool(key, v);
    else if (key == "kink_epsilon") s.prox.kink_epsilon = parse_double(key, v);
    else if (key == "rho_a") s.admm.rho_a = parse_double(key, v);
    else if (key == "lambda_u") s.admm.lambda_u = parse_double(key, v);
    else if (key == "admm_period") s.admm.period = parse_int(key, v);
    else if (key == "epochs") s.epochs = parse_int(key, v);
    else if (key == "batch_size") s.batch_size = parse_int(key, v);
    else if (key == "w_lr_max") s.w_lr_max = parse_double(key, v);
    else if (key == "w_lr_min") s.w_lr_min = parse_double(key, v);
    else if (key == "w_momentum") s.w_momentum = parse_double(key, v);
    else if (key == "w_weight_decay") s.w_weight_decay = parse_double(key, v);
    else if (key == "alpha_lr") s.alpha_lr = parse_double(key, v);
    else if (key == "alpha_lr_min") s.alpha_lr_min = parse_double(key, v);
    else if (key == "alpha_weight_decay") s.alpha_weight_decay = parse_double(key, v);
    else if (key == "alpha_cosine") s.alpha_cosine = parse_bool(key, v);
    else if (key == "eval_epochs") e.eval.epochs = parse_int(key, v);
    else if (key == "eval_batch_size") e.eval.batch_size = parse_int(key, v);
    else if (key == "eval_lr_max") e.eval.lr_max = parse_double(key, v);
    else if (key == "eval_lr_min") e.eval.lr_min = parse_double(key, v);
    else if (key == "eval_momentum") e.eval.momentum = parse_double(key, v);
    else if (key == "eval_weight_decay") e.eval.weight_decay = parse_double(key, v);
    else if (key == "eval_grad_clip") e.eval.grad_clip = parse_double(key, v);
    else throw std::runtime_error("unknown config key: " + key);
  }
  arm_label(e.arm);  // rejects unknown arm names
  if (e.test_fraction < 0 || e.test_fraction >= 1)
    throw std::runtime_error("test_fraction must lie in [0, 1)");
  if (e.trials < 1) throw std::runtime_error("trials must be >= 1");
  if (e.threads < 1) throw std::runtime_error("threads must be >= 1");
  if (e.random_baseline < 0) throw std::runtime_error("random_baseline must be >= 0");
  return e;
}

std::vector<std::string> arm_names() {
  return {"darts", "constant", "fimt",     "pr",       "prime",     "admm",
          "admm_fimt", "crb",      "fimt_crb", "prime_crb", "admm_fimt_crb"};
}

std::string arm_label(const std::string& arm) {
  if (arm == "darts") return "Alternating baseline";
  if (arm == "constant") return "Constant interleave (1:k)";
  if (arm == "fimt") return "Dynamic schedule";
  if (arm == "pr") return "Proximity regularization";
  if (arm == "prime") return "Dynamic schedule + proximity";
  if (arm == "admm") return "ADMM regularization";
  if (arm == "admm_fimt") return "Dynamic schedule + ADMM";
  if (arm == "crb") return "Clipped blend";
  if (arm == "fimt_crb") return "Clipped blend + dynamic";
  if (arm == "prime_crb") return "Clipped blend + dynamic + proximity";
  if (arm == "admm_fimt_crb") return "Clipped blend + dynamic + ADMM";
  throw std::runtime_error("unknown arm: " + arm);
}

SearchConfig config_for_arm(const std::string& arm, SearchConfig base) {
  auto set = [&](ScheduleKind sk, RegKind rk, Activation ak) {
    base.scheduler.kind = sk;
    base.reg = rk;
    base.space.activation = ak;
  };
  if (arm == "darts") set(ScheduleKind::alternating, RegKind::none, Activation::softmax);
  else if (arm == "constant") set(ScheduleKind::constant, RegKind::none, Activation::softmax);
  else if (arm == "fimt") set(ScheduleKind::dynamic_fimt, RegKind::none, Activation::softmax);
  else if (arm == "pr") set(ScheduleKind::alternating, RegKind::proximity, Activation::softmax);
  else if (arm == "prime") set(ScheduleKind::dynamic_fimt, RegKind::proximity, Activation::softmax);
  else if (arm == "admm") set(ScheduleKind::alternating, RegKind::admm, Activation::softmax);
  else if (arm == "admm_fimt") set(ScheduleKind::dynamic_fimt, RegKind::admm, Activation::softmax);
  else if (arm == "crb") set(ScheduleKind::alternating, RegKind::none, Activation::crb);
  else if (arm == "fimt_crb") set(ScheduleKind::dynamic_fimt, RegKind::none, Activation::crb);
  else if (arm == "prime_crb") set(ScheduleKind::dynamic_fimt, RegKind::proximity, Activation::crb);
  else if (arm == "admm_fimt_crb") set(ScheduleKind::dynamic_fimt, RegKind::admm, Activation::crb);
  else throw std::runtime_error("unknown arm: " + arm);
  return base;
}

SearchConfig arm_search_config(const ExperimentConfig& e, const std::string& arm) {
  SearchConfig s = config_for_arm(arm, e.search_template);
  // explicit keys win over the arm preset
  auto it = e.kv.find("schedule");
  if (it != e.kv.end()) s.scheduler.kind = parse_schedule(it->second);
  it = e.kv.find("regularizer");
  if (it != e.kv.end()) s.reg = parse_reg(it->second);
  it = e.kv.find("activation");
  if (it != e.kv.end()) s.space.activation = parse_activation(it->second);
  return s;
}

ExperimentData make_experiment_data(const ExperimentConfig& e) {
  Dataset full = generate_dataset(e.dataset);
  auto parts = train_test_split(full, e.test_fraction, e.dataset.seed);
  ExperimentData d;
  d.search_part = std::move(parts.first);
  d.test_part = std::move(parts.second);
  return d;
}

TrialResult run_trial(const ExperimentConfig& e, const SearchConfig& scfg0, uint64_t seed,
                      const ExperimentData& data) {
  TrialResult tr;
  tr.seed = seed;
  try {
    SearchConfig scfg = scfg0;
    scfg.seed = seed;
    scfg.space.input_dim = data.search_part.X.shape[1];
    scfg.space.num_classes = data.search_part.classes;

    auto t0 = std::chrono::steady_clock::now();
    SearchResult res = run_search(scfg, data.search_part);
    auto t1 = std::chrono::steady_clock::now();
    tr.search_seconds = std::chrono::duration<double>(t1 - t0).count();

    CellSpace space = CellSpace::from(scfg.space);
    tr.final_dist = distance_to_S(res.final_activated, space);
    tr.skip_frac = skip_fraction(res.arch, space);
    tr.genotype_json = export_genotype(res.arch, space);
    for (const StepRecord& rec : res.history.steps)
      if (rec.fired) ++tr.fires;
    tr.steps = static_cast<long>(res.history.steps.size());

    EvalConfig ec = e.eval;
    ec.seed = seed;
    t0 = std::chrono::steady_clock::now();
    tr.eval = retrain_discrete(res.arch, scfg.space, data.search_part, data.test_part, ec);
    t1 = std::chrono::steady_clock::now();
    tr.eval_seconds = std::chrono::duration<double>(t1 - t0).count();
    tr.ok = true;
  } catch (const std::exception& ex) {
    tr.ok = false;
    tr.error = ex.what();
  }
  return tr;
}

std::pair<double, double> mean_stdev(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v)};
}

ArmSummary run_arm(const ExperimentConfig& e, const std::string& arm, const ExperimentData& data) {
  ArmSummary s;
  s.arm = arm;
  s.label = arm_label(arm);
  SearchConfig scfg = arm_search_config(e, arm);
  int T = e.trials;
  s.trials.resize(T);

  auto work = [&](int t) { s.trials[t] = run_trial(e, scfg, e.seed0 + static_cast<uint64_t>(t), data); };

  if (e.threads <= 1 || T <= 1) {
    for (int t = 0; t < T; ++t) work(t);
  } else {
    std::atomic<int> next{0};
    int nw = std::min(e.threads, T);
    std::vector<std::thread> workers;
    workers.reserve(nw);
    for (int w = 0; w < nw; ++w)
      workers.emplace_back([&] {
        for (int t = next.fetch_add(1); t < T; t = next.fetch_add(1)) work(t);
      });
    for (std::thread& w : workers) w.join();
  }

  std::vector<double> errs;
  double params = 0, fires = 0, skip = 0;
  for (const TrialResult& tr : s.trials) {
    if (!tr.ok) {
      ++s.failures;
      continue;
    }
    errs.push_back(tr.eval.test_error);
    params += static_cast<double>(tr.eval.param_count);
    fires += static_cast<double>(tr.fires);
    skip += tr.skip_frac;
  }
  if (!errs.empty()) {
    auto ms = mean_stdev(errs);
    s.mean_error = ms.first;
    s.stdev_error = ms.second;
    double n = static_cast<double>(errs.size());
    s.mean_params = params / n;
    s.mean_fires = fires / n;
    s.mean_skip = skip / n;
  }
  return s;
}

BaselineSummary random_baseline(const ExperimentConfig& e, const SearchConfig& scfg0,
                                const ExperimentData& data, int count) {
  BaselineSummary b;
  b.count = count;
  SearchConfig scfg = scfg0;
  scfg.space.input_dim = data.search_part.X.shape[1];
  scfg.space.num_classes = data.search_part.classes;
  CellSpace space = CellSpace::from(scfg.space);
  Rng rng(e.seed0);
  for (int i = 0; i < count; ++i) {
    DiscreteArchitecture arch = random_genotype(space, scfg.space.num_cell_types, rng);
    EvalConfig ec = e.eval;
    ec.seed = e.seed0 + static_cast<uint64_t>(i);
    EvalResult r = retrain_discrete(arch, scfg.space, data.search_part, data.test_part, ec);
    b.errors.push_back(r.test_error);
  }
  auto ms = mean_stdev(b.errors);
  b.mean_error = ms.first;
  b.stdev_error = ms.second;
  return b;
}

std::string report_json(const ExperimentConfig& e, const std::vector<ArmSummary>& arms,
                        const std::optional<BaselineSummary>& baseline) {
  nlohmann::json j;
  j["dataset"] = {{"kind", e.dataset.kind},
                  {"size", e.dataset.size},
                  {"noise", e.dataset.noise},
                  {"classes", e.dataset.classes},
                  {"seed", e.dataset.seed}};
  j["test_fraction"] = e.test_fraction;
  j["trials"] = e.trials;
  j["seed"] = e.seed0;
  nlohmann::json ja = nlohmann::json::array();
  for (const ArmSummary& a : arms) {
    nlohmann::json jt = nlohmann::json::array();
    for (const TrialResult& tr : a.trials) {
      nlohmann::json t;
      t["seed"] = tr.seed;
      t["ok"] = tr.ok;
      if (!tr.ok) {
        t["error"] = tr.error;
      } else {
        t["test_error"] = tr.eval.test_error;
        t["param_count"] = tr.eval.param_count;
        t["final_train_loss"] = tr.eval.final_train_loss;
        t["final_dist"] = tr.final_dist;
        t["skip_fraction"] = tr.skip_frac;
        t["fires"] = tr.fires;
        t["steps"] = tr.steps;
        t["search_seconds"] = tr.search_seconds;
        t["eval_seconds"] = tr.eval_seconds;
        t["genotype"] = nlohmann::json::parse(tr.genotype_json);
      }
      jt.push_back(std::move(t));
    }
    ja.push_back({{"arm", a.arm},
                  {"label", a.label},
                  {"failures", a.failures},
                  {"mean_error", a.mean_error},
                  {"stdev_error", a.stdev_error},
                  {"mean_params", a.mean_params},
                  {"mean_fires", a.mean_fires},
                  {"mean_skip", a.mean_skip},
                  {"trials", std::move(jt)}});
  }
  j["arms"] = std::move(ja);
  if (baseline) {
    j["random_baseline"] = {{"count", baseline->count},
                            {"mean_error", baseline->mean_error},
                            {"stdev_error", baseline->stdev_error},
                            {"errors", baseline->errors}};
  }
  return j.dump(2) + "\n";
}

std::string report_table(const std::vector<ArmSummary>& arms,
                         const std::optional<BaselineSummary>& baseline) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-14s %-36s %10s %9s %9s %7s %6s\n", "arm", "label",
                "err(mean)", "err(sd)", "params", "fires", "ok");
  out += buf;
  out += std::string(96, '-') + "\n";
  for (const ArmSummary& a : arms) {
    int ok = static_cast<int>(a.trials.size()) - a.failures;
    std::snprintf(buf, sizeof buf, "%-14s %-36s %10.4f %9.4f %9.0f %7.1f %3d/%-2d\n",
                  a.arm.c_str(), a.label.c_str(), a.mean_error, a.stdev_error, a.mean_params,
                  a.mean_fires, ok, static_cast<int>(a.trials.size()));
    out += buf;
  }
  if (baseline) {
    std::snprintf(buf, sizeof buf, "%-14s %-36s %10.4f %9.4f %9s %7s %6d\n", "random",
                  "Random genotype baseline", baseline->mean_error, baseline->stdev_error, "", "",
                  baseline->count);
    out += buf;
  }
  return out;
}

}  // namespace dnas

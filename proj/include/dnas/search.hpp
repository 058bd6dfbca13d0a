#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dnas/dataset.hpp"
#include "dnas/discretize.hpp"
#include "dnas/genotype.hpp"
#include "dnas/optim.hpp"
#include "dnas/regularize.hpp"
#include "dnas/search_space.hpp"

namespace dnas {

enum class RegKind { none, proximity, admm };

struct SearchConfig {
  SearchSpaceConfig space;
  SchedulerConfig scheduler;

  RegKind reg = RegKind::none;
  ProximityConfig prox;
  AdmmConfig admm;

  int epochs = 12;
  int batch_size = 32;

  double w_lr_max = 0.05;
  double w_lr_min = 0.001;
  double w_momentum = 0.9;
  double w_weight_decay = 3e-4;

  double alpha_lr = 0.01;
  double alpha_lr_min = 0.0;
  double alpha_weight_decay = 1e-3;
  bool alpha_cosine = true;  // annealing of the architecture learning rate
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  uint64_t seed = 101;

  void validate() const;
};

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double train_loss = 0;
  double trace = 0;
  double ewma = 0;
  std::optional<double> h;  // only meaningful for the dynamic schedule
  bool fired = false;
  double c = 0;
  std::optional<double> val_loss;
  std::optional<double> penalty;
  std::optional<double> dist;
};

struct AlphaSnapshot {
  int epoch = 0;
  Activation mode = Activation::softmax;
  int num_inputs = 2;
  int num_states = 2;
  std::vector<OpKind> ops;
  ActivatedAlpha activated;
  std::vector<std::vector<uint8_t>> active;
};

struct SearchHistory {
  std::vector<StepRecord> steps;
  std::vector<AlphaSnapshot> snapshots;

  std::string csv() const;
  void write_csv(const std::string& path) const;
  // one file per epoch: alpha_ep0000.json, ...
  void write_snapshots(const std::string& dir) const;
};

std::string snapshot_json(const AlphaSnapshot& snap);
AlphaSnapshot parse_snapshot(const std::string& json_text);

// Regularizer bundle threaded through alpha steps.
struct RegDriver {
  RegKind kind = RegKind::none;
  ProximityConfig prox;
  std::optional<AdmmState> admm;
};

struct WStepOut {
  double loss = 0;
  double trace = 0;
};

// One minibatch descent step on the network weights. The gradient used for
// the step is left in the parameter buffers so the caller can inspect it.
WStepOut w_step(Supernet& net, AlphaStore& alpha, const Tensor& X, const std::vector<int>& y,
                Optimizer& wopt);

struct AlphaStepOut {
  double val_loss = 0;
  std::optional<double> penalty;
  std::optional<double> dist;
};

// One first-order architecture step on a validation batch: validation loss
// gradient by reverse mode, plus the configured penalty gradient, then Adam.
AlphaStepOut alpha_step(Supernet& net, AlphaStore& alpha, const Tensor& X,
                        const std::vector<int>& y, RegDriver& reg, Optimizer& aopt, double c,
                        const CellSpace& space);

struct SearchResult {
  DiscreteArchitecture arch;
  SearchHistory history;
  ActivatedAlpha final_activated;
  std::vector<std::vector<uint8_t>> final_active;
};

SearchResult run_search(const SearchConfig& cfg, const Dataset& data);

struct Checkpoint {
  int epoch = 0;  // number of epochs completed when the snapshot was taken
  DiscreteArchitecture arch;
};

struct ExtendedResult {
  std::vector<Checkpoint> checkpoints;  // periodic, final always appended
  SearchHistory history;
};

ExtendedResult extended_run(const SearchConfig& cfg, const Dataset& data, int checkpoint_every);

struct EvalConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr_max = 0.05;
  double lr_min = 0.001;
  double momentum = 0.9;
  double weight_decay = 3e-4;
  double grad_clip = 5.0;  // global gradient-norm ceiling, 0 disables
  uint64_t seed = 101;
};

struct EvalResult {
  double test_error = 1.0;
  long param_count = 0;
  double final_train_loss = 0;
};

long discrete_param_count(const DiscreteArchitecture& arch, const SearchSpaceConfig& cfg);

// Re-initialize the chosen architecture at full size, train it on the whole
// search dataset, and measure held-out error.
EvalResult retrain_discrete(const DiscreteArchitecture& arch, const SearchSpaceConfig& cfg,
                            const Dataset& train, const Dataset& test, const EvalConfig& ecfg);

}  // namespace dnas

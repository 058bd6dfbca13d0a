#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnas/search.hpp"

namespace dnas {

using KeyValues = std::map<std::string, std::string>;

// Flat key=value configuration. Lines starting with '#' and blank lines are
// skipped; later keys overwrite earlier ones.
KeyValues parse_kv_text(const std::string& text);
KeyValues parse_kv_file(const std::string& path);
// Tokens of the form key=value, e.g. from the command line.
KeyValues parse_kv_items(const std::vector<std::string>& items);

struct ExperimentConfig {
  KeyValues kv;  // the raw keys, kept so arm presets can be overridden

  std::string arm = "prime";
  DatasetSpec dataset;
  double test_fraction = 0.25;
  int trials = 4;
  uint64_t seed0 = 101;  // first trial seed; trial t uses seed0 + t
  int threads = 1;
  int random_baseline = 0;  // number of random genotypes to retrain, 0 = off

  SearchConfig search_template;  // generic hyperparameters, arm not yet applied
  EvalConfig eval;
};

// Builds an ExperimentConfig from flat keys; throws on unknown keys or bad
// values.
ExperimentConfig resolve_experiment(const KeyValues& kv);

std::vector<std::string> arm_names();
std::string arm_label(const std::string& arm);

// Applies an arm preset (schedule kind, regularizer, activation) on top of a
// template config.
SearchConfig config_for_arm(const std::string& arm, SearchConfig base);

// Preset plus any explicit schedule/regularizer/activation keys, which win
// over the preset.
SearchConfig arm_search_config(const ExperimentConfig& e, const std::string& arm);

struct TrialResult {
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalResult eval;
  double final_dist = 0;
  double skip_frac = 0;
  long fires = 0;
  long steps = 0;
  double search_seconds = 0;
  double eval_seconds = 0;
  std::string genotype_json;
};

struct ArmSummary {
  std::string arm;
  std::string label;
  std::vector<TrialResult> trials;
  int failures = 0;
  double mean_error = 0;
  double stdev_error = 0;
  double mean_params = 0;
  double mean_fires = 0;
  double mean_skip = 0;
};

// Shared data for one experiment: the full dataset and its held-out split.
struct ExperimentData {
  Dataset search_part;  // used for bilevel search and for retraining
  Dataset test_part;
};

ExperimentData make_experiment_data(const ExperimentConfig& e);

TrialResult run_trial(const ExperimentConfig& e, const SearchConfig& scfg, uint64_t seed,
                      const ExperimentData& data);

// Runs every trial of one arm, optionally across worker threads.
ArmSummary run_arm(const ExperimentConfig& e, const std::string& arm, const ExperimentData& data);

struct BaselineSummary {
  int count = 0;
  double mean_error = 0;
  double stdev_error = 0;
  std::vector<double> errors;
};

// Retrains uniformly random members of the constraint set under the same
// evaluation protocol.
BaselineSummary random_baseline(const ExperimentConfig& e, const SearchConfig& scfg,
                                const ExperimentData& data, int count);

std::string report_json(const ExperimentConfig& e, const std::vector<ArmSummary>& arms,
                        const std::optional<BaselineSummary>& baseline);
std::string report_table(const std::vector<ArmSummary>& arms,
                         const std::optional<BaselineSummary>& baseline);

// Mean and sample standard deviation (zero for fewer than two values).
std::pair<double, double> mean_stdev(const std::vector<double>& xs);

}  // namespace dnas

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dnas/fimt.hpp"
#include "dnas/tensor.hpp"

namespace dnas {

struct DatasetSpec {
  std::string kind = "moons";  // moons | blobs | spirals
  int size = 2000;
  double noise = 0.15;
  int classes = 2;
  uint64_t seed = 101;
};

struct Dataset {
  Tensor X;  // [n, d], standardized per feature
  std::vector<int> y;
  int classes = 2;

  int size() const { return static_cast<int>(y.size()); }
};

Dataset generate_dataset(const DatasetSpec& spec);

Dataset subset(const Dataset& d, const std::vector<int>& idx);

// Seeded permutation split into (rest, test).
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             uint64_t seed);

struct SplitIdx {
  std::vector<int> train, valid;
};

// Disjoint, exhaustive, seeded permutation split of n samples. The training
// fraction is ratio/(ratio+1) where ratio is the schedule's w:alpha step
// ratio (1 for the alternating schedule, so 50/50).
SplitIdx split_dataset(int n, const SchedulerConfig& sched, uint64_t seed);

}  // namespace dnas

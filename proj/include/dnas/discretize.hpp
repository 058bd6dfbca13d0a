#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnas/search_space.hpp"

namespace dnas {

// A point in the discrete constraint set: per cell type, a flat [E*P] vector
// of exact 0/1 entries, two selected (source, op) pairs per state from
// distinct sources, and "none" never selected.
struct DiscreteArchitecture {
  std::vector<std::vector<double>> s;  // per cell type

  int num_cell_types() const { return static_cast<int>(s.size()); }
};

// Nearest member of the constraint set under Euclidean distance. Works on any
// real-valued input (selection reduces to per-source argmax plus top-two
// sources because every member has the same norm). Ties break toward the
// lowest operator index, then the lowest source index.
std::vector<double> project_vector(const std::vector<double>& v, const CellSpace& space);
DiscreteArchitecture project_to_S(const ActivatedAlpha& act, const CellSpace& space);

struct Violation {
  int cell_type = 0;
  int state = -1;
  std::string set_name;  // "S1", "S2", "S3" or "none"
  std::string detail;
};

bool validate_in_S(const DiscreteArchitecture& arch, const CellSpace& space,
                   std::vector<Violation>* out = nullptr);

// Number of members of the constraint set for one cell type.
uint64_t count_S(const CellSpace& space);

// Visit every member (flat vectors) without materializing the whole set.
void visit_S(const CellSpace& space, const std::function<void(const std::vector<double>&)>& fn);

// Materialized version, guarded to small sets.
std::vector<std::vector<double>> enumerate_S(const CellSpace& space);

// Euclidean distance from activated alpha to its projection, accumulated over
// all cell types.
double distance_to_S(const ActivatedAlpha& act, const CellSpace& space);

// Deactivate entries whose raw weight is not positive. The mask only ever
// shrinks. Returns how many entries were newly pruned. Softmax mode errors.
long crb_prune_update(AlphaStore& store);

}  // namespace dnas

#pragma once

#include <string>
#include <vector>

#include "dnas/discretize.hpp"
#include "dnas/search_space.hpp"

namespace dnas {

// Cell type names used in genotype files: "normal", and "reduce" when two
// types are configured.
std::vector<std::string> cell_type_names(int num_cell_types);

// Serialize a valid architecture as JSON text. Triples are ordered by
// (state, source); the "_meta" block records the layout and skip fraction.
std::string export_genotype(const DiscreteArchitecture& arch, const CellSpace& space);

// Inverse of export_genotype; validates names and layout against the space.
DiscreteArchitecture import_genotype(const std::string& json_text, const CellSpace& space);

// Fraction of selected operators that are skip connections.
double skip_fraction(const DiscreteArchitecture& arch, const CellSpace& space);

// Uniformly random member of the constraint set.
DiscreteArchitecture random_genotype(const CellSpace& space, int num_cell_types, Rng& rng);

}  // namespace dnas

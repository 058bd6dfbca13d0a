#include "dnas/genotype.hpp"

#include <json.hpp>

namespace dnas {

using nlohmann::json;

std::vector<std::string> cell_type_names(int num_cell_types) {
  if (num_cell_types == 1) return {"normal"};
  if (num_cell_types == 2) return {"normal", "reduce"};
  throw std::runtime_error("cell_type_names: cell types must be 1 or 2");
}

std::string export_genotype(const DiscreteArchitecture& arch, const CellSpace& space) {
  std::vector<Violation> viol;
  if (!validate_in_S(arch, space, &viol)) {
    std::string msg = "export_genotype: architecture is not a member of the constraint set";
    if (!viol.empty()) msg += " (" + viol[0].set_name + ": " + viol[0].detail + ")";
    throw std::runtime_error(msg);
  }
  json root;
  auto names = cell_type_names(arch.num_cell_types());
  for (int t = 0; t < arch.num_cell_types(); ++t) {
    json triples = json::array();
    for (int i = 0; i < space.num_states; ++i)
      for (int j = 0; j < space.num_sources(i); ++j) {
        int e = space.edge_index(i, j);
        for (int p = 0; p < space.num_ops(); ++p)
          if (arch.s[t][space.flat(e, p)] != 0.0)
            triples.push_back({{"state", i}, {"source", j}, {"op", op_name(space.ops[p])}});
      }
    root[names[t]] = std::move(triples);
  }
  json ops = json::array();
  for (OpKind k : space.ops) ops.push_back(op_name(k));
  root["_meta"] = {{"inputs", space.num_inputs},
                   {"states", space.num_states},
                   {"ops", ops},
                   {"skip_fraction", skip_fraction(arch, space)}};
  return root.dump(2) + "\n";
}

DiscreteArchitecture import_genotype(const std::string& json_text, const CellSpace& space) {
  json root = json::parse(json_text);
  if (root.contains("_meta")) {
    const json& meta = root["_meta"];
    if (meta.value("inputs", space.num_inputs) != space.num_inputs ||
        meta.value("states", space.num_states) != space.num_states)
      throw std::runtime_error("import_genotype: layout in file does not match this space");
  }
  DiscreteArchitecture arch;
  int types = root.contains("reduce") ? 2 : 1;
  if (!root.contains("normal")) throw std::runtime_error("import_genotype: missing normal cell");
  auto names = cell_type_names(types);
  for (int t = 0; t < types; ++t) {
    std::vector<double> s(static_cast<size_t>(space.num_edges()) * space.num_ops(), 0.0);
    for (const json& triple : root[names[t]]) {
      int state = triple.at("state").get<int>();
      int source = triple.at("source").get<int>();
      OpKind kind = op_from_name(triple.at("op").get<std::string>());
      int p = -1;
      for (int q = 0; q < space.num_ops(); ++q)
        if (space.ops[q] == kind) p = q;
      if (p < 0)
        throw std::runtime_error("import_genotype: operator not in this space's roster");
      s[space.flat(space.edge_index(state, source), p)] = 1.0;
    }
    arch.s.push_back(std::move(s));
  }
  std::vector<Violation> viol;
  if (!validate_in_S(arch, space, &viol))
    throw std::runtime_error("import_genotype: file does not describe a valid architecture" +
                             (viol.empty() ? std::string()
                                           : " (" + viol[0].set_name + ": " + viol[0].detail + ")"));
  return arch;
}

double skip_fraction(const DiscreteArchitecture& arch, const CellSpace& space) {
  long selected = 0, skips = 0;
  for (int t = 0; t < arch.num_cell_types(); ++t)
    for (int e = 0; e < space.num_edges(); ++e)
      for (int p = 0; p < space.num_ops(); ++p)
        if (arch.s[t][space.flat(e, p)] != 0.0) {
          selected++;
          if (space.ops[p] == OpKind::skip) skips++;
        }
  if (selected == 0) return 0.0;
  return static_cast<double>(skips) / static_cast<double>(selected);
}

DiscreteArchitecture random_genotype(const CellSpace& space, int num_cell_types, Rng& rng) {
  DiscreteArchitecture arch;
  std::vector<int> selectable;
  for (int p = 0; p < space.num_ops(); ++p)
    if (p != space.none_index) selectable.push_back(p);
  if (selectable.empty()) throw std::runtime_error("random_genotype: no selectable operator");
  for (int t = 0; t < num_cell_types; ++t) {
    std::vector<double> s(static_cast<size_t>(space.num_edges()) * space.num_ops(), 0.0);
    for (int i = 0; i < space.num_states; ++i) {
      int ns = space.num_sources(i);
      if (ns < 2) throw std::runtime_error("random_genotype: state has fewer than 2 sources");
      int j1 = rng.uniform_int(0, ns - 1);
      int j2 = rng.uniform_int(0, ns - 2);
      if (j2 >= j1) j2++;
      for (int j : {j1, j2}) {
        int p = selectable[rng.uniform_int(0, static_cast<int>(selectable.size()) - 1)];
        s[space.flat(space.edge_index(i, j), p)] = 1.0;
      }
    }
    arch.s.push_back(std::move(s));
  }
  return arch;
}

}  // namespace dnas

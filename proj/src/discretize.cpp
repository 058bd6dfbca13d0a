#include "dnas/discretize.hpp"

#include <cmath>

namespace dnas {

namespace {

constexpr uint64_t kEnumGuard = 1000000;

struct PickedEdge {
  double val;
  int source;
  int op;
};

// best non-"none" op on one edge; strict > keeps the lowest op index on ties
PickedEdge best_on_edge(const std::vector<double>& v, const CellSpace& space, int edge,
                        int source) {
  PickedEdge pick{0.0, source, -1};
  for (int p = 0; p < space.num_ops(); ++p) {
    if (p == space.none_index) continue;
    double x = v[space.flat(edge, p)];
    if (pick.op < 0 || x > pick.val) {
      pick.val = x;
      pick.op = p;
    }
  }
  if (pick.op < 0) throw std::runtime_error("project: no selectable operator on edge");
  return pick;
}

}  // namespace

std::vector<double> project_vector(const std::vector<double>& v, const CellSpace& space) {
  size_t expect = static_cast<size_t>(space.num_edges()) * space.num_ops();
  if (v.size() != expect) throw std::runtime_error("project: size does not match layout");
  std::vector<double> s(expect, 0.0);
  for (int i = 0; i < space.num_states; ++i) {
    int ns = space.num_sources(i);
    if (ns < 2) throw std::runtime_error("project: state has fewer than 2 available sources");
    std::vector<PickedEdge> picks;
    for (int j = 0; j < ns; ++j)
      picks.push_back(best_on_edge(v, space, space.edge_index(i, j), j));
    // two distinct sources with the largest picked values; sources are scanned
    // in ascending order and compared strictly, so ties keep the lower index
    int first = -1, second = -1;
    for (int j = 0; j < ns; ++j)
      if (first < 0 || picks[j].val > picks[first].val) first = j;
    for (int j = 0; j < ns; ++j) {
      if (j == first) continue;
      if (second < 0 || picks[j].val > picks[second].val) second = j;
    }
    s[space.flat(space.edge_index(i, picks[first].source), picks[first].op)] = 1.0;
    s[space.flat(space.edge_index(i, picks[second].source), picks[second].op)] = 1.0;
  }
  return s;
}

DiscreteArchitecture project_to_S(const ActivatedAlpha& act, const CellSpace& space) {
  DiscreteArchitecture arch;
  for (const Tensor& a : act) {
    if (a.rows() != space.num_edges() || a.cols() != space.num_ops())
      throw std::runtime_error("project: activated alpha does not match layout");
    arch.s.push_back(project_vector(a.data, space));
  }
  return arch;
}

bool validate_in_S(const DiscreteArchitecture& arch, const CellSpace& space,
                   std::vector<Violation>* out) {
  bool ok = true;
  auto flag = [&](int t, int state, const char* set, std::string detail) {
    ok = false;
    if (out) out->push_back({t, state, set, std::move(detail)});
  };
  for (int t = 0; t < arch.num_cell_types(); ++t) {
    const std::vector<double>& s = arch.s[t];
    if (s.size() != static_cast<size_t>(space.num_edges()) * space.num_ops()) {
      flag(t, -1, "S3", "entry count does not match layout");
      continue;
    }
    for (size_t i = 0; i < s.size(); ++i)
      if (s[i] != 0.0 && s[i] != 1.0) {
        flag(t, space.edges[i / space.num_ops()].first, "S3",
             "entry " + std::to_string(i) + " is not binary");
        break;
      }
    for (int i = 0; i < space.num_states; ++i) {
      int state_total = 0;
      for (int j = 0; j < space.num_sources(i); ++j) {
        int e = space.edge_index(i, j);
        int edge_total = 0;
        for (int p = 0; p < space.num_ops(); ++p)
          if (s[space.flat(e, p)] != 0.0) edge_total++;
        if (edge_total > 1)
          flag(t, i, "S1",
               "edge from source " + std::to_string(j) + " has " + std::to_string(edge_total) +
                   " active operators");
        state_total += edge_total;
      }
      if (state_total != 2)
        flag(t, i, "S2", "state has " + std::to_string(state_total) + " active operators");
    }
    if (space.none_index >= 0)
      for (int e = 0; e < space.num_edges(); ++e)
        if (s[space.flat(e, space.none_index)] != 0.0)
          flag(t, space.edges[e].first, "none", "the none operator is never selectable");
  }
  return ok;
}

uint64_t count_S(const CellSpace& space) {
  int nn = space.num_ops() - (space.none_index >= 0 ? 1 : 0);
  if (nn < 1) throw std::runtime_error("count_S: no selectable operator");
  uint64_t total = 1;
  for (int i = 0; i < space.num_states; ++i) {
    int ns = space.num_sources(i);
    if (ns < 2) throw std::runtime_error("count_S: state has fewer than 2 sources");
    uint64_t pairs = static_cast<uint64_t>(ns) * (ns - 1) / 2;
    uint64_t per_state = pairs * static_cast<uint64_t>(nn) * nn;
    if (total > kEnumGuard / per_state)
      throw std::runtime_error("count_S: constraint set exceeds the enumeration guard");
    total *= per_state;
  }
  return total;
}

namespace {

void visit_states(const CellSpace& space, int state, std::vector<double>& buf,
                  const std::function<void(const std::vector<double>&)>& fn) {
  if (state == space.num_states) {
    fn(buf);
    return;
  }
  int ns = space.num_sources(state);
  for (int j1 = 0; j1 < ns; ++j1)
    for (int j2 = j1 + 1; j2 < ns; ++j2)
      for (int p1 = 0; p1 < space.num_ops(); ++p1) {
        if (p1 == space.none_index) continue;
        for (int p2 = 0; p2 < space.num_ops(); ++p2) {
          if (p2 == space.none_index) continue;
          int f1 = space.flat(space.edge_index(state, j1), p1);
          int f2 = space.flat(space.edge_index(state, j2), p2);
          buf[f1] = 1.0;
          buf[f2] = 1.0;
          visit_states(space, state + 1, buf, fn);
          buf[f1] = 0.0;
          buf[f2] = 0.0;
        }
      }
}

}  // namespace

void visit_S(const CellSpace& space, const std::function<void(const std::vector<double>&)>& fn) {
  count_S(space);  // enforces the guard
  std::vector<double> buf(static_cast<size_t>(space.num_edges()) * space.num_ops(), 0.0);
  visit_states(space, 0, buf, fn);
}

std::vector<std::vector<double>> enumerate_S(const CellSpace& space) {
  std::vector<std::vector<double>> all;
  all.reserve(count_S(space));
  visit_S(space, [&](const std::vector<double>& s) { all.push_back(s); });
  return all;
}

double distance_to_S(const ActivatedAlpha& act, const CellSpace& space) {
  DiscreteArchitecture proj = project_to_S(act, space);
  double sq = 0;
  for (size_t t = 0; t < act.size(); ++t)
    for (long i = 0; i < act[t].numel(); ++i) {
      double d = act[t].data[i] - proj.s[t][i];
      sq += d * d;
    }
  return std::sqrt(sq);
}

long crb_prune_update(AlphaStore& store) {
  if (store.mode != Activation::crb)
    throw std::runtime_error("crb_prune_update: pruning only applies to the unit-clipped mode");
  long newly = 0;
  for (int t = 0; t < store.num_cell_types(); ++t) {
    const Tensor& raw = store.alpha[t].value;
    std::vector<uint8_t>& keep = store.active[t];
    for (long i = 0; i < raw.numel(); ++i)
      if (keep[i] && raw.data[i] <= 0.0) {
        keep[i] = 0;
        newly++;
      }
  }
  return newly;
}

}  // namespace dnas

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "dnas/discretize.hpp"
#include "dnas/genotype.hpp"
#include "oracles.hpp"

using namespace dnas;
using testutil::close;

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// brute-force nearest member, strict < so the first visited argmin wins,
// matching the documented tie order
std::vector<double> brute_project(const std::vector<double>& v, const CellSpace& space) {
  std::vector<double> best;
  double best_d = std::numeric_limits<double>::infinity();
  visit_S(space, [&](const std::vector<double>& m) {
    double d = sqdist(v, m);
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  });
  return best;
}

}  // namespace

TEST_CASE("projection equals brute force nearest member") {
  CellSpace space = make_cell_space(2, 2, {OpKind::none_op, OpKind::skip, OpKind::affine_relu});
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(space.num_edges() * space.num_ops());
    for (double& x : v) x = rng.uniform(-1.0, 2.0);
    std::vector<double> got = project_vector(v, space);
    std::vector<double> want = brute_project(v, space);
    INFO("trial ", trial);
    REQUIRE(got == want);
  }
}

TEST_CASE("projection is idempotent and members project to themselves") {
  CellSpace space = make_cell_space(2, 2, default_ops(Activation::softmax));
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(space.num_edges() * space.num_ops());
    for (double& x : v) x = rng.uniform(-1.0, 2.0);
    std::vector<double> p = project_vector(v, space);
    CHECK(project_vector(p, space) == p);
  }
  int seen = 0;
  visit_S(space, [&](const std::vector<double>& m) {
    if (seen++ % 97 == 0) CHECK(project_vector(m, space) == m);
  });
}

TEST_CASE("tie break picks the lowest op index then the lowest source") {
  // two ops beyond none, two states, two inputs
  CellSpace space = make_cell_space(2, 1, {OpKind::none_op, OpKind::skip, OpKind::affine_relu});
  // single state, sources 0 and 1, ops none/skip/relu. Flat layout [2 edges x 3].
  std::vector<double> v(6, 0.0);
  // all zeros: every candidate is equally distant, so (skip on both sources)
  // must win: op index 1 beats 2, sources 0 and 1 are the only pair.
  std::vector<double> p = project_vector(v, space);
  std::vector<double> want{0, 1, 0, 0, 1, 0};
  CHECK(p == want);

  // make source scores equal but skew op values on source 1: relu and skip tie
  // there too; the lower op index must still win on each source
  v = {0.0, 0.5, 0.5, 0.0, 0.25, 0.25};
  p = project_vector(v, space);
  CHECK(p == want);
}

TEST_CASE("validate_in_S flags each violation class") {
  CellSpace space = make_cell_space(2, 2, default_ops(Activation::softmax));
  const int P = space.num_ops();
  auto member = [&] {
    std::vector<double> m(space.num_edges() * P, 0.0);
    // state 0 from sources 0,1; state 1 from sources 0,1; op 1 everywhere
    m[space.flat(space.edge_index(0, 0), 1)] = 1.0;
    m[space.flat(space.edge_index(0, 1), 1)] = 1.0;
    m[space.flat(space.edge_index(1, 0), 1)] = 1.0;
    m[space.flat(space.edge_index(1, 1), 1)] = 1.0;
    return m;
  };

  DiscreteArchitecture ok;
  ok.s = {member()};
  CHECK(validate_in_S(ok, space));

  SUBCASE("two ops on one edge") {
    DiscreteArchitecture bad;
    bad.s = {member()};
    bad.s[0][space.flat(space.edge_index(0, 0), 2)] = 1.0;
    std::vector<Violation> vs;
    CHECK_FALSE(validate_in_S(bad, space, &vs));
    REQUIRE_FALSE(vs.empty());
    CHECK(vs.front().set_name == "S1");
  }
  SUBCASE("wrong number of sources per state") {
    DiscreteArchitecture bad;
    bad.s = {member()};
    bad.s[0][space.flat(space.edge_index(1, 1), 1)] = 0.0;  // one source only
    std::vector<Violation> vs;
    CHECK_FALSE(validate_in_S(bad, space, &vs));
    bool saw = false;
    for (const auto& v : vs) saw = saw || v.set_name == "S2";
    CHECK(saw);

    DiscreteArchitecture bad3;
    bad3.s = {member()};
    bad3.s[0][space.flat(space.edge_index(1, 2), 1)] = 1.0;  // three sources
    CHECK_FALSE(validate_in_S(bad3, space));
  }
  SUBCASE("fractional entry") {
    DiscreteArchitecture bad;
    bad.s = {member()};
    bad.s[0][space.flat(space.edge_index(0, 0), 1)] = 0.5;
    std::vector<Violation> vs;
    CHECK_FALSE(validate_in_S(bad, space, &vs));
    bool saw = false;
    for (const auto& v : vs) saw = saw || v.set_name == "S3";
    CHECK(saw);
  }
  SUBCASE("none selected") {
    DiscreteArchitecture bad;
    bad.s = {member()};
    bad.s[0][space.flat(space.edge_index(0, 0), 1)] = 0.0;
    bad.s[0][space.flat(space.edge_index(0, 0), 0)] = 1.0;
    std::vector<Violation> vs;
    CHECK_FALSE(validate_in_S(bad, space, &vs));
    bool saw = false;
    for (const auto& v : vs) saw = saw || v.set_name == "none";
    CHECK(saw);
  }
  SUBCASE("wrong vector length") {
    DiscreteArchitecture bad;
    bad.s = {std::vector<double>(5, 0.0)};
    CHECK_FALSE(validate_in_S(bad, space));
  }
}

TEST_CASE("count_S matches the enumeration and the closed form") {
  // per state i: C(inputs+i, 2) source pairs, (P-1)^2 op choices
  CellSpace s22 = make_cell_space(2, 2, default_ops(Activation::softmax));
  CHECK(count_S(s22) == 1875);  // [1 * 25] * [3 * 25]
  long n = 0;
  visit_S(s22, [&](const std::vector<double>&) { ++n; });
  CHECK(n == 1875);

  CellSpace s13 = make_cell_space(2, 3, {OpKind::none_op, OpKind::skip, OpKind::affine_relu});
  uint64_t expect = 1;
  for (int i = 0; i < 3; ++i) {
    int srcs = 2 + i;
    expect *= static_cast<uint64_t>(srcs * (srcs - 1) / 2) * 4;
  }
  CHECK(count_S(s13) == expect);

  auto all = enumerate_S(s13);
  CHECK(all.size() == expect);
  for (size_t i = 0; i < all.size(); i += 53) {
    DiscreteArchitecture a;
    a.s = {all[i]};
    CHECK(validate_in_S(a, s13));
  }
}

TEST_CASE("enumeration refuses huge spaces") {
  CellSpace big = make_cell_space(2, 6, default_ops(Activation::softmax));
  CHECK_THROWS(count_S(big));
  CHECK_THROWS(enumerate_S(big));
  CHECK_THROWS(visit_S(big, [](const std::vector<double>&) {}));
}

TEST_CASE("distance_to_S is zero exactly on members") {
  CellSpace space = make_cell_space(2, 2, default_ops(Activation::softmax));
  Rng rng(31);
  DiscreteArchitecture m = random_genotype(space, 2, rng);
  ActivatedAlpha act;
  for (auto& row : m.s) {
    Tensor t({space.num_edges(), space.num_ops()});
    t.data = row;
    act.push_back(t);
  }
  CHECK(distance_to_S(act, space) == 0.0);

  act[0].data[1] += 0.25;
  CHECK(distance_to_S(act, space) > 0.0);
}

TEST_CASE("crb prune update removes nonpositive raws and is monotone") {
  SearchSpaceConfig cfg;
  cfg.num_states = 2;
  cfg.width = 2;
  cfg.num_cell_types = 1;
  cfg.num_cells = 1;
  cfg.activation = Activation::crb;
  cfg.input_dim = 2;
  cfg.num_classes = 2;
  auto built = build_supernet(cfg, 5);
  AlphaStore& store = built.second;

  store.alpha[0].value.at(0, 0) = -0.1;
  store.alpha[0].value.at(1, 2) = 0.0;
  long pruned = crb_prune_update(store);
  CHECK(pruned == 2);
  CHECK(store.active[0][0 * store.alpha[0].value.cols() + 0] == 0);
  CHECK(store.active[0][1 * store.alpha[0].value.cols() + 2] == 0);

  // raising the raw back above zero must not resurrect the entry
  store.alpha[0].value.at(0, 0) = 0.9;
  CHECK(crb_prune_update(store) == 0);
  CHECK(store.active[0][0] == 0);

  // masked entries activate to exactly zero
  ActivatedAlpha act = activate_alpha(store);
  CHECK(act[0].at(0, 0) == 0.0);
  CHECK(act[0].at(1, 2) == 0.0);
}

TEST_CASE("crb prune rejects softmax stores") {
  SearchSpaceConfig cfg;
  cfg.num_states = 1;
  cfg.width = 2;
  cfg.num_cell_types = 1;
  cfg.num_cells = 1;
  cfg.input_dim = 2;
  cfg.num_classes = 2;
  auto built = build_supernet(cfg, 5);
  CHECK_THROWS(crb_prune_update(built.second));
}

TEST_CASE("genotype export import round trip") {
  CellSpace space = make_cell_space(2, 2, default_ops(Activation::softmax));
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteArchitecture arch = random_genotype(space, 2, rng);
    REQUIRE(validate_in_S(arch, space));
    std::string j = export_genotype(arch, space);
    DiscreteArchitecture back = import_genotype(j, space);
    CHECK(back.s == arch.s);
  }
}

TEST_CASE("genotype import rejects corrupt input") {
  CellSpace space = make_cell_space(2, 2, default_ops(Activation::softmax));
  Rng rng(3);
  DiscreteArchitecture arch = random_genotype(space, 2, rng);
  std::string j = export_genotype(arch, space);

  CHECK_THROWS(import_genotype("not json", space));
  CHECK_THROWS(import_genotype("{}", space));

  // an op name outside the roster
  std::string bad = j;
  size_t pos = bad.find("\"op\": \"");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 7, "\"op\": \"x");
  CHECK_THROWS(import_genotype(bad, space));

  // a space with a different roster must refuse the file
  CellSpace other = make_cell_space(2, 2, {OpKind::none_op, OpKind::skip});
  CHECK_THROWS(import_genotype(j, other));
}

TEST_CASE("skip fraction") {
  CellSpace space = make_cell_space(2, 2, default_ops(Activation::softmax));
  const int P = space.num_ops();
  int skip_idx = -1, relu_idx = -1;
  for (int p = 0; p < P; ++p) {
    if (space.ops[p] == OpKind::skip) skip_idx = p;
    if (space.ops[p] == OpKind::affine_relu) relu_idx = p;
  }
  REQUIRE(skip_idx >= 0);
  REQUIRE(relu_idx >= 0);
  DiscreteArchitecture arch;
  std::vector<double> m(space.num_edges() * P, 0.0);
  m[space.flat(space.edge_index(0, 0), skip_idx)] = 1.0;
  m[space.flat(space.edge_index(0, 1), relu_idx)] = 1.0;
  m[space.flat(space.edge_index(1, 0), relu_idx)] = 1.0;
  m[space.flat(space.edge_index(1, 2), relu_idx)] = 1.0;
  arch.s = {m};
  REQUIRE(validate_in_S(arch, space));
  CHECK(close(skip_fraction(arch, space), 0.25, 1e-12, 1e-12));
}

TEST_CASE("random genotypes are uniformly valid") {
  CellSpace space = make_cell_space(2, 3, default_ops(Activation::softmax));
  Rng rng(91);
  for (int i = 0; i < 100; ++i) {
    DiscreteArchitecture g = random_genotype(space, 2, rng);
    REQUIRE(g.num_cell_types() == 2);
    REQUIRE(validate_in_S(g, space));
  }
}

TEST_CASE("cell type names") {
  auto one = cell_type_names(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == "normal");
  auto two = cell_type_names(2);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == "normal");
  CHECK(two[1] == "reduce");
}

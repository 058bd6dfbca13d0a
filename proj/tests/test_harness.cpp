#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dnas/experiment.hpp"
#include "dnas/plot.hpp"
#include "oracles.hpp"

using namespace dnas;
using testutil::close;

namespace {

KeyValues quick_kv() {
  return parse_kv_items({"dataset_size=160", "epochs=2", "batch_size=16", "trials=2",
                         "states=2", "width=3", "cells=2", "eval_epochs=2"});
}

}  // namespace

TEST_CASE("kv text parsing") {
  KeyValues kv = parse_kv_text(
      "# a comment\n"
      "\n"
      "  arm = prime  \n"
      "epochs=3\n"
      "epochs=5\n"
      "# trailing\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("arm") == "prime");
  CHECK(kv.at("epochs") == "5");  // later assignment wins

  CHECK_THROWS(parse_kv_text("this line has no equals sign\n"));
}

TEST_CASE("kv item parsing") {
  KeyValues kv = parse_kv_items({"a=1", "b=two", "a=3"});
  CHECK(kv.at("a") == "3");
  CHECK(kv.at("b") == "two");
  CHECK_THROWS(parse_kv_items({"noequals"}));
  CHECK_THROWS(parse_kv_items({"=value"}));
}

TEST_CASE("experiment resolution defaults and overrides") {
  ExperimentConfig e = resolve_experiment({});
  CHECK(e.arm == "prime");
  CHECK(e.trials == 4);
  CHECK(e.seed0 == 101);
  CHECK(e.dataset.kind == "moons");
  CHECK(e.search_template.scheduler.r == 10);

  KeyValues kv = quick_kv();
  kv["arm"] = "darts";
  kv["dataset"] = "blobs";
  kv["dataset_noise"] = "0.3";
  kv["seed"] = "7";
  kv["r"] = "5";
  kv["rho_p"] = "0.25";
  kv["alpha_cosine"] = "false";
  ExperimentConfig f = resolve_experiment(kv);
  CHECK(f.arm == "darts");
  CHECK(f.dataset.kind == "blobs");
  CHECK(f.dataset.noise == 0.3);
  CHECK(f.seed0 == 7);
  CHECK(f.search_template.scheduler.r == 5);
  CHECK(f.search_template.prox.rho_p == 0.25);
  CHECK_FALSE(f.search_template.alpha_cosine);
  CHECK(f.search_template.space.width == 3);
  CHECK(f.search_template.epochs == 2);
}

TEST_CASE("experiment resolution rejects junk") {
  CHECK_THROWS(resolve_experiment({{"no_such_key", "1"}}));
  CHECK_THROWS(resolve_experiment({{"epochs", "three"}}));
  CHECK_THROWS(resolve_experiment({{"epochs", "3x"}}));
  CHECK_THROWS(resolve_experiment({{"test_fraction", "1.5"}}));
  CHECK_THROWS(resolve_experiment({{"schedule", "sometimes"}}));
  CHECK_THROWS(resolve_experiment({{"regularizer", "l2"}}));
  CHECK_THROWS(resolve_experiment({{"activation", "relu"}}));
  CHECK_THROWS(resolve_experiment({{"arm", "nonesuch"}}));
  CHECK_THROWS(resolve_experiment({{"alpha_cosine", "maybe"}}));
}

TEST_CASE("arm presets") {
  auto names = arm_names();
  CHECK(names.size() == 11);
  for (const auto& n : names) CHECK_FALSE(arm_label(n).empty());
  CHECK_THROWS(arm_label("bogus"));

  SearchConfig base;
  SearchConfig darts = config_for_arm("darts", base);
  CHECK(darts.scheduler.kind == ScheduleKind::alternating);
  CHECK(darts.reg == RegKind::none);
  CHECK(darts.space.activation == Activation::softmax);

  SearchConfig prime = config_for_arm("prime", base);
  CHECK(prime.scheduler.kind == ScheduleKind::dynamic_fimt);
  CHECK(prime.reg == RegKind::proximity);

  SearchConfig admm = config_for_arm("admm_fimt_crb", base);
  CHECK(admm.scheduler.kind == ScheduleKind::dynamic_fimt);
  CHECK(admm.reg == RegKind::admm);
  CHECK(admm.space.activation == Activation::crb);

  CHECK(config_for_arm("constant", base).scheduler.kind == ScheduleKind::constant);
  CHECK(config_for_arm("pr", base).reg == RegKind::proximity);
  CHECK(config_for_arm("crb", base).space.activation == Activation::crb);
  CHECK_THROWS(config_for_arm("bogus", base));
}

TEST_CASE("explicit keys override the arm preset") {
  KeyValues kv = quick_kv();
  kv["arm"] = "prime";
  kv["schedule"] = "alternating";
  kv["regularizer"] = "none";
  ExperimentConfig e = resolve_experiment(kv);
  SearchConfig overridden = arm_search_config(e, "prime");

  KeyValues dkv = quick_kv();
  dkv["arm"] = "darts";
  ExperimentConfig d = resolve_experiment(dkv);
  SearchConfig plain = arm_search_config(d, "darts");

  CHECK(overridden.scheduler.kind == plain.scheduler.kind);
  CHECK(overridden.reg == plain.reg);

  // and the runs agree byte for byte
  ExperimentData data = make_experiment_data(e);
  overridden.seed = plain.seed = 5;
  overridden.space.input_dim = plain.space.input_dim = data.search_part.X.cols();
  overridden.space.num_classes = plain.space.num_classes = data.search_part.classes;
  SearchResult r1 = run_search(overridden, data.search_part);
  SearchResult r2 = run_search(plain, data.search_part);
  CHECK(r1.history.csv() == r2.history.csv());
}

TEST_CASE("trial and arm runs") {
  KeyValues kv = quick_kv();
  ExperimentConfig e = resolve_experiment(kv);
  ExperimentData data = make_experiment_data(e);
  CHECK(data.search_part.size() + data.test_part.size() == 160);
  CHECK(data.test_part.size() == 40);

  SearchConfig scfg = arm_search_config(e, "darts");
  TrialResult t = run_trial(e, scfg, 5, data);
  REQUIRE(t.ok);
  CHECK(t.steps > 0);
  CHECK(t.fires > 0);
  CHECK(t.eval.test_error >= 0.0);
  CHECK(t.eval.test_error <= 1.0);
  CHECK_FALSE(t.genotype_json.empty());

  ArmSummary s = run_arm(e, "darts", data);
  CHECK(s.arm == "darts");
  CHECK(s.trials.size() == 2);
  CHECK(s.failures == 0);
  CHECK(s.trials[0].seed == e.seed0);
  CHECK(s.trials[1].seed == e.seed0 + 1);
}

TEST_CASE("threaded arm runs match sequential ones") {
  KeyValues kv = quick_kv();
  ExperimentConfig e1 = resolve_experiment(kv);
  ExperimentData data = make_experiment_data(e1);
  ArmSummary seq = run_arm(e1, "fimt", data);

  kv["threads"] = "2";
  ExperimentConfig e2 = resolve_experiment(kv);
  ArmSummary par = run_arm(e2, "fimt", data);

  REQUIRE(seq.trials.size() == par.trials.size());
  for (size_t i = 0; i < seq.trials.size(); ++i) {
    CHECK(seq.trials[i].seed == par.trials[i].seed);
    CHECK(seq.trials[i].eval.test_error == par.trials[i].eval.test_error);
    CHECK(seq.trials[i].genotype_json == par.trials[i].genotype_json);
  }
  CHECK(seq.mean_error == par.mean_error);
}

TEST_CASE("mean and stdev") {
  auto [m0, s0] = mean_stdev({});
  CHECK(m0 == 0.0);
  CHECK(s0 == 0.0);
  auto [m1, s1] = mean_stdev({3.0});
  CHECK(m1 == 3.0);
  CHECK(s1 == 0.0);
  auto [m, s] = mean_stdev({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  CHECK(close(m, 5.0, 1e-15, 0.0));
  CHECK(close(s * s, 32.0 / 7.0, 1e-12, 0.0));  // sample variance
}

TEST_CASE("reports") {
  KeyValues kv = quick_kv();
  kv["trials"] = "1";
  ExperimentConfig e = resolve_experiment(kv);
  ExperimentData data = make_experiment_data(e);
  std::vector<ArmSummary> arms{run_arm(e, "darts", data)};
  SearchConfig scfg = arm_search_config(e, "darts");
  BaselineSummary base = random_baseline(e, scfg, data, 3);
  CHECK(base.count == 3);
  CHECK(base.errors.size() == 3);

  std::string j = report_json(e, arms, base);
  CHECK(j.find("\"darts\"") != std::string::npos);
  CHECK(j.find("random_baseline") != std::string::npos);

  std::string table = report_table(arms, base);
  CHECK(table.find("darts") != std::string::npos);
  CHECK(table.find(arm_label("darts")) != std::string::npos);
  CHECK(table.find("random") != std::string::npos);
}

TEST_CASE("csv parser accepts blanks and rejects malformed rows") {
  CsvTable t = parse_history_csv("a,b,c\n1,,3\n4,5,\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.col("b") == 1);
  CHECK(t.col("zzz") == -1);
  CHECK_FALSE(t.cell(0, 1).has_value());
  CHECK(*t.cell(1, 1) == 5.0);
  CHECK_FALSE(t.cell(1, 2).has_value());

  CHECK_THROWS(parse_history_csv("a,b\n1\n"));        // wrong cell count
  CHECK_THROWS(parse_history_csv("a,b\n1,apple\n"));  // not a number
  CHECK_THROWS(parse_history_csv(""));
}

TEST_CASE("timeline svg is deterministic and marks fires") {
  SearchConfig cfg;
  cfg.space.num_states = 2;
  cfg.space.width = 3;
  cfg.space.num_cells = 2;
  cfg.space.num_cell_types = 2;
  cfg.space.input_dim = 2;
  cfg.space.num_classes = 2;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.scheduler.kind = ScheduleKind::dynamic_fimt;
  DatasetSpec spec;
  spec.size = 200;
  Dataset data = generate_dataset(spec);
  SearchResult r = run_search(cfg, data);

  CsvTable t = parse_history_csv(r.history.csv());
  std::string svg1 = fimt_timeline_svg(t);
  std::string svg2 = fimt_timeline_svg(t);
  CHECK(svg1 == svg2);
  CHECK(svg1.find("<svg") != std::string::npos);
  CHECK(svg1.find("class=\"ewma\"") != std::string::npos);
  CHECK(svg1.find("class=\"threshold\"") != std::string::npos);
  CHECK(svg1.find("class=\"fire\"") != std::string::npos);

  std::string svg3 = alpha_trajectory_svg(r.history.snapshots);
  CHECK(svg3.find("<svg") != std::string::npos);
  CHECK(svg3.find("op-skip") != std::string::npos);
  CHECK(alpha_trajectory_svg(r.history.snapshots) == svg3);

  // missing required columns are an error
  CsvTable bare = parse_history_csv("x,y\n1,2\n");
  CHECK_THROWS(fimt_timeline_svg(bare));
}

TEST_CASE("snapshot directory loader sorts by epoch") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "dnas_snapdir_test";
  fs::remove_all(dir);

  SearchConfig cfg;
  cfg.space.num_states = 2;
  cfg.space.width = 3;
  cfg.space.num_cells = 2;
  cfg.space.num_cell_types = 2;
  cfg.space.input_dim = 2;
  cfg.space.num_classes = 2;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  DatasetSpec spec;
  spec.size = 200;
  SearchResult r = run_search(cfg, generate_dataset(spec));
  r.history.write_snapshots(dir.string());

  std::vector<AlphaSnapshot> snaps = load_snapshot_dir(dir.string());
  REQUIRE(snaps.size() == 3);
  CHECK(snaps[0].epoch == 1);
  CHECK(snaps[2].epoch == 3);

  // stray files are ignored, empty directories are an error
  write_text_file((dir / "notes.txt").string(), "ignored\n");
  CHECK(load_snapshot_dir(dir.string()).size() == 3);
  fs::path empty = fs::temp_directory_path() / "dnas_snapdir_empty";
  fs::create_directories(empty);
  CHECK_THROWS(load_snapshot_dir(empty.string()));
  fs::remove_all(dir);
  fs::remove_all(empty);
}

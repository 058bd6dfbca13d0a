#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dnas/experiment.hpp"
#include "dnas/genotype.hpp"
#include "dnas/plot.hpp"
#include "dnas/search.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "flat key=value configuration file");
  cmd->add_option("--set", o.sets, "override as key=value (repeatable)");
}

dnas::ExperimentConfig load_experiment(const CommonOpts& o) {
  dnas::KeyValues kv;
  if (!o.config.empty()) kv = dnas::parse_kv_file(o.config);
  for (const auto& [k, v] : dnas::parse_kv_items(o.sets)) kv[k] = v;
  return dnas::resolve_experiment(kv);
}

dnas::SearchConfig concrete_config(const dnas::ExperimentConfig& e, const std::string& arm,
                                   const dnas::ExperimentData& data) {
  dnas::SearchConfig scfg = dnas::arm_search_config(e, arm);
  scfg.seed = e.seed0;
  scfg.space.input_dim = data.search_part.X.shape[1];
  scfg.space.num_classes = data.search_part.classes;
  return scfg;
}

int cmd_search(const CommonOpts& o, const std::string& out_dir) {
  dnas::ExperimentConfig e = load_experiment(o);
  dnas::ExperimentData data = dnas::make_experiment_data(e);
  dnas::SearchConfig scfg = concrete_config(e, e.arm, data);

  std::printf("arm=%s schedule=%s  searching...\n", e.arm.c_str(),
              scfg.scheduler.kind == dnas::ScheduleKind::alternating ? "alternating"
              : scfg.scheduler.kind == dnas::ScheduleKind::constant  ? "constant"
                                                                     : "dynamic");
  dnas::SearchResult res = dnas::run_search(scfg, data.search_part);

  std::filesystem::create_directories(out_dir);
  res.history.write_csv(out_dir + "/history.csv");
  res.history.write_snapshots(out_dir + "/snapshots");
  dnas::CellSpace space = dnas::CellSpace::from(scfg.space);
  dnas::write_text_file(out_dir + "/genotype.json", dnas::export_genotype(res.arch, space));

  long fires = 0;
  for (const auto& rec : res.history.steps)
    if (rec.fired) ++fires;
  double dist = dnas::distance_to_S(res.final_activated, space);
  double skip = dnas::skip_fraction(res.arch, space);

  dnas::EvalConfig ec = e.eval;
  ec.seed = e.seed0;
  dnas::EvalResult ev =
      dnas::retrain_discrete(res.arch, scfg.space, data.search_part, data.test_part, ec);

  nlohmann::json j;
  j["arm"] = e.arm;
  j["seed"] = e.seed0;
  j["steps"] = res.history.steps.size();
  j["fires"] = fires;
  j["final_dist"] = dist;
  j["skip_fraction"] = skip;
  j["test_error"] = ev.test_error;
  j["param_count"] = ev.param_count;
  j["final_train_loss"] = ev.final_train_loss;
  dnas::write_text_file(out_dir + "/summary.json", j.dump(2) + "\n");

  dnas::write_text_file(out_dir + "/fimt_timeline.svg",
                        dnas::fimt_timeline_svg(dnas::parse_history_csv(res.history.csv())));
  dnas::write_text_file(out_dir + "/alpha_trajectory.svg",
                        dnas::alpha_trajectory_svg(res.history.snapshots));

  std::printf("steps=%zu fires=%ld final_dist=%.6f skip=%.3f\n", res.history.steps.size(), fires,
              dist, skip);
  std::printf("retrained: test_error=%.4f params=%ld train_loss=%.4f\n", ev.test_error,
              ev.param_count, ev.final_train_loss);
  std::printf("wrote %s/{history.csv,snapshots,genotype.json,summary.json,*.svg}\n",
              out_dir.c_str());
  return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& arms_csv, const std::string& out_dir) {
  dnas::ExperimentConfig e = load_experiment(o);
  dnas::ExperimentData data = dnas::make_experiment_data(e);

  std::vector<std::string> arms;
  if (arms_csv == "all") {
    arms = dnas::arm_names();
  } else {
    std::string cur;
    for (char ch : arms_csv + ",") {
      if (ch == ',') {
        if (!cur.empty()) arms.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  if (arms.empty()) throw std::runtime_error("no arms requested");
  for (const std::string& a : arms) dnas::arm_label(a);  // validate names up front

  std::vector<dnas::ArmSummary> summaries;
  for (const std::string& a : arms) {
    std::printf("running arm %s (%d trials)...\n", a.c_str(), e.trials);
    std::fflush(stdout);
    summaries.push_back(dnas::run_arm(e, a, data));
  }

  std::optional<dnas::BaselineSummary> baseline;
  if (e.random_baseline > 0) {
    std::printf("retraining %d random genotypes...\n", e.random_baseline);
    std::fflush(stdout);
    dnas::SearchConfig scfg = dnas::config_for_arm("darts", e.search_template);
    baseline = dnas::random_baseline(e, scfg, data, e.random_baseline);
  }

  std::string table = dnas::report_table(summaries, baseline);
  std::printf("%s", table.c_str());
  std::filesystem::create_directories(out_dir);
  dnas::write_text_file(out_dir + "/report.json", dnas::report_json(e, summaries, baseline));
  dnas::write_text_file(out_dir + "/table.txt", table);
  std::printf("wrote %s/{report.json,table.txt}\n", out_dir.c_str());

  int failures = 0;
  for (const auto& s : summaries) failures += s.failures;
  if (failures > 0) {
    std::fprintf(stderr, "%d trial(s) failed\n", failures);
    return 1;
  }
  return 0;
}

int cmd_extended(const CommonOpts& o, int every, const std::string& out_dir) {
  dnas::ExperimentConfig e = load_experiment(o);
  dnas::ExperimentData data = dnas::make_experiment_data(e);
  dnas::SearchConfig scfg = concrete_config(e, e.arm, data);

  std::printf("arm=%s extended run: %d epochs, checkpoint every %d...\n", e.arm.c_str(),
              scfg.epochs, every);
  std::fflush(stdout);
  dnas::ExtendedResult res = dnas::extended_run(scfg, data.search_part, every);

  std::filesystem::create_directories(out_dir);
  res.history.write_csv(out_dir + "/history.csv");
  res.history.write_snapshots(out_dir + "/snapshots");

  dnas::CellSpace space = dnas::CellSpace::from(scfg.space);
  nlohmann::json arr = nlohmann::json::array();
  for (const dnas::Checkpoint& cp : res.checkpoints) {
    dnas::EvalConfig ec = e.eval;
    ec.seed = e.seed0;
    dnas::EvalResult ev =
        dnas::retrain_discrete(cp.arch, scfg.space, data.search_part, data.test_part, ec);
    double skip = dnas::skip_fraction(cp.arch, space);
    std::printf("  after %3d epochs: test_error=%.4f skip=%.3f params=%ld\n", cp.epoch,
                ev.test_error, skip, ev.param_count);
    std::fflush(stdout);
    arr.push_back({{"epoch", cp.epoch},
                   {"test_error", ev.test_error},
                   {"skip_fraction", skip},
                   {"param_count", ev.param_count},
                   {"genotype", nlohmann::json::parse(dnas::export_genotype(cp.arch, space))}});
  }
  nlohmann::json j;
  j["arm"] = e.arm;
  j["epochs"] = scfg.epochs;
  j["checkpoint_every"] = every;
  j["checkpoints"] = std::move(arr);
  dnas::write_text_file(out_dir + "/extended.json", j.dump(2) + "\n");
  std::printf("wrote %s/{extended.json,history.csv,snapshots}\n", out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& genotype_path) {
  dnas::ExperimentConfig e = load_experiment(o);
  dnas::ExperimentData data = dnas::make_experiment_data(e);
  dnas::SearchConfig scfg = concrete_config(e, e.arm, data);
  dnas::CellSpace space = dnas::CellSpace::from(scfg.space);
  dnas::DiscreteArchitecture arch =
      dnas::import_genotype(dnas::read_text_file(genotype_path), space);
  dnas::EvalConfig ec = e.eval;
  ec.seed = e.seed0;
  dnas::EvalResult ev =
      dnas::retrain_discrete(arch, scfg.space, data.search_part, data.test_part, ec);
  std::printf("test_error=%.4f params=%ld train_loss=%.4f skip=%.3f\n", ev.test_error,
              ev.param_count, ev.final_train_loss, dnas::skip_fraction(arch, space));
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& snap_dir,
             const std::string& out_dir) {
  if (csv_path.empty() && snap_dir.empty())
    throw std::runtime_error("plot: pass --csv and/or --snapshots");
  std::filesystem::create_directories(out_dir);
  if (!csv_path.empty()) {
    dnas::CsvTable t = dnas::parse_history_csv(dnas::read_text_file(csv_path));
    dnas::write_text_file(out_dir + "/fimt_timeline.svg", dnas::fimt_timeline_svg(t));
    std::printf("wrote %s/fimt_timeline.svg\n", out_dir.c_str());
  }
  if (!snap_dir.empty()) {
    std::vector<dnas::AlphaSnapshot> snaps = dnas::load_snapshot_dir(snap_dir);
    dnas::write_text_file(out_dir + "/alpha_trajectory.svg", dnas::alpha_trajectory_svg(snaps));
    std::printf("wrote %s/alpha_trajectory.svg\n", out_dir.c_str());
  }
  return 0;
}

int cmd_report(const std::string& in_path) {
  nlohmann::json j = nlohmann::json::parse(dnas::read_text_file(in_path));
  std::vector<dnas::ArmSummary> arms;
  for (const auto& ja : j.at("arms")) {
    dnas::ArmSummary a;
    a.arm = ja.at("arm").get<std::string>();
    a.label = ja.at("label").get<std::string>();
    a.failures = ja.at("failures").get<int>();
    a.mean_error = ja.at("mean_error").get<double>();
    a.stdev_error = ja.at("stdev_error").get<double>();
    a.mean_params = ja.at("mean_params").get<double>();
    a.mean_fires = ja.at("mean_fires").get<double>();
    a.trials.resize(ja.at("trials").size());
    arms.push_back(std::move(a));
  }
  std::optional<dnas::BaselineSummary> baseline;
  if (j.contains("random_baseline")) {
    dnas::BaselineSummary b;
    b.count = j["random_baseline"].at("count").get<int>();
    b.mean_error = j["random_baseline"].at("mean_error").get<double>();
    b.stdev_error = j["random_baseline"].at("stdev_error").get<double>();
    baseline = std::move(b);
  }
  std::printf("%s", dnas::report_table(arms, baseline).c_str());
  int failures = 0;
  for (const auto& a : arms) failures += a.failures;
  return failures > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable architecture search on toy classification tasks"};
  app.require_subcommand(1);

  CommonOpts so;
  std::string search_out = "out/search";
  CLI::App* search = app.add_subcommand("search", "run one architecture search and evaluate it");
  add_common(search, so);
  search->add_option("--out", search_out, "output directory");

  CommonOpts ao;
  std::string ablate_arms = "darts,fimt,pr,prime";
  std::string ablate_out = "out/ablate";
  CLI::App* ablate = app.add_subcommand("ablate", "run an arm-by-arm comparison");
  add_common(ablate, ao);
  ablate->add_option("--arms", ablate_arms, "comma-separated arm names, or 'all'");
  ablate->add_option("--out", ablate_out, "output directory");

  CommonOpts xo;
  int every = 5;
  std::string ext_out = "out/extended";
  CLI::App* extended = app.add_subcommand("extended", "long run with periodic checkpoints");
  add_common(extended, xo);
  extended->add_option("--every", every, "checkpoint period in epochs")->check(CLI::PositiveNumber);
  extended->add_option("--out", ext_out, "output directory");

  CommonOpts eo;
  std::string genotype_path;
  CLI::App* eval = app.add_subcommand("eval", "retrain a genotype file from scratch");
  add_common(eval, eo);
  eval->add_option("--genotype", genotype_path, "genotype json path")->required();

  std::string plot_csv, plot_snaps, plot_out = "out/plots";
  CLI::App* plot = app.add_subcommand("plot", "render svg plots from run artifacts");
  plot->add_option("--csv", plot_csv, "history csv path");
  plot->add_option("--snapshots", plot_snaps, "snapshot directory");
  plot->add_option("--out", plot_out, "output directory");

  std::string report_in;
  CLI::App* report = app.add_subcommand("report", "print the table for a report.json");
  report->add_option("--in", report_in, "report.json path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (search->parsed()) return cmd_search(so, search_out);
    if (ablate->parsed()) return cmd_ablate(ao, ablate_arms, ablate_out);
    if (extended->parsed()) return cmd_extended(xo, every, ext_out);
    if (eval->parsed()) return cmd_eval(eo, genotype_path);
    if (plot->parsed()) return cmd_plot(plot_csv, plot_snaps, plot_out);
    if (report->parsed()) return cmd_report(report_in);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 0;
}

// Command-line front end: train, eval, ablate, compare, gradcheck, export-tasks.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "metarl/harness/config.hpp"
#include "metarl/harness/suite.hpp"
#include "metarl/harness/train.hpp"

namespace fs = std::filesystem;
using namespace metarl;
using namespace metarl::harness;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string method;
  std::string variant;
  std::string split;
  std::string checkpoint;
  std::optional<std::size_t> workers;
  bool deterministic_eval = false;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run configuration file (sectioned key = value)");
  cmd->add_option("--seed", f.seed, "run seed (overrides the config)");
  cmd->add_option("--output", f.output, "output directory (overrides TESP_OUTPUT_DIR and the config)");
  cmd->add_option("--workers", f.workers, "per-task worker threads (0 = task batch size)");
  cmd->add_flag("--deterministic-eval", f.deterministic_eval, "evaluate with mean actions");
}

RunConfig resolve(const Flags& f, std::optional<fs::path> fallback_config = std::nullopt) {
  RunConfig c;
  if (!f.config.empty()) {
    c = load_config(f.config);
  } else if (fallback_config && fs::exists(*fallback_config)) {
    c = load_config(*fallback_config);
  }
  c.output = output_directory(c).string();
  if (!f.output.empty()) c.output = f.output;
  if (f.seed) {
    c.seed = *f.seed;
    c.seeds = {*f.seed};
  }
  if (!f.method.empty()) c.method = parse_method(f.method);
  if (!f.variant.empty()) c.variant = tesp::parse_variant(f.variant);
  if (f.workers) c.workers = *f.workers;
  if (f.deterministic_eval) c.deterministic_eval = true;
  c.validate();
  return c;
}

void print_eval(const EvalRecord& r) {
  std::cout << fmt::format("meta_iteration={} split={} mean_return={} std_over_tasks={} embedding_norm={}\n",
                           r.meta_iteration, envs::region_name(r.split), format_number(r.mean_return),
                           format_number(r.std_over_tasks()), format_number(r.mean_embedding_norm()));
}

int cmd_train(const Flags& f) {
  const RunConfig c = resolve(f);
  TrainOptions opts;
  if (!f.checkpoint.empty()) opts.resume = f.checkpoint;
  opts.on_iteration = [](const IterationStats& s) {
    std::cerr << fmt::format("iter {:>5}  objective {:>12}  train_return {:>12}  |h| {:>10}\n", s.meta_iteration,
                             format_number(s.objective), format_number(s.train_return),
                             format_number(s.embedding_norm));
  };
  opts.on_eval = print_eval;
  const TrainResult r = train_loop(c, opts);
  std::cout << "output: " << r.output.string() << "\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  if (f.checkpoint.empty()) throw CLI::RequiredError("--checkpoint");
  const fs::path ckpt = f.checkpoint;
  const RunConfig c = resolve(f, ckpt.parent_path().parent_path() / "config.ini");
  const envs::Region split = envs::parse_region(f.split.empty() ? "D" : f.split);
  const EvalRecord r = evaluate_checkpoint(c, ckpt, split);
  print_eval(r);
  write_eval_records(std::cout, std::span(&r, 1));
  return 0;
}

int cmd_suite(const Flags& f, bool ablate) {
  const RunConfig c = resolve(f);
  const auto entries = ablate ? ablation_entries(c) : comparison_entries(c);
  SuiteOptions opts;
  opts.on_run = [](const std::string& label, std::uint64_t seed) {
    std::cerr << fmt::format("== {} seed {}\n", label, seed);
  };
  const auto runs = run_suite(c, entries, c.output, opts);
  std::cout << format_final_table(runs);
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  constexpr double kTolerance = 1e-4;
  const auto cases = run_gradcheck_suites(f.seed.value_or(1));
  std::size_t probes = 0;
  bool ok = true;
  for (const auto& c : cases) {
    const bool pass = c.result.max_relative_error < kTolerance;
    ok = ok && pass;
    probes += c.result.probes;
    std::cout << fmt::format("{:<28} probes {:>4}  max_rel_err {:.3e}  {}\n", c.name, c.result.probes,
                             c.result.max_relative_error, pass ? "ok" : "FAIL  " + c.result.worst);
  }
  std::cout << fmt::format("{} cases, {} probes, {}\n", cases.size(), probes, ok ? "all within 1e-4" : "FAILED");
  return ok ? 0 : 1;
}

int cmd_export(const Flags& f) {
  RunConfig c = resolve(f);
  const TaskSets sets = make_task_sets(c);
  std::vector<envs::Region> splits{envs::Region::train, envs::Region::iid_test, envs::Region::ood_test};
  if (!f.split.empty()) splits = {envs::parse_region(f.split)};
  for (envs::Region s : splits) {
    if (f.output.empty()) {
      envs::write_task_set(std::cout, sets.of(s));
    } else {
      std::ostringstream ss;
      envs::write_task_set(ss, sets.of(s));
      write_text(fs::path(f.output) / ("tasks_" + envs::region_name(s) + ".tsv"), ss.str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-RL with task encoders: training, evaluation and comparison suites"};
  app.require_subcommand(1);
  Flags flags;

  auto* train = app.add_subcommand("train", "meta-train one method / seed");
  add_run_flags(train, flags);
  train->add_option("--method", flags.method, "tesp, maml, meta_sgd or adapt_sv");
  train->add_option("--variant", flags.variant, "TESP ablation variant");
  train->add_option("--checkpoint", flags.checkpoint, "resume from this checkpoint");

  auto* eval = app.add_subcommand("eval", "adapt and evaluate a checkpoint on one task split");
  add_run_flags(eval, flags);
  eval->add_option("--method", flags.method, "method the checkpoint was trained with");
  eval->add_option("--variant", flags.variant, "variant the checkpoint was trained with");
  eval->add_option("--checkpoint", flags.checkpoint, "checkpoint file")->required();
  eval->add_option("--split", flags.split, "D, D_prime or D_double_prime");

  auto* ablate = app.add_subcommand("ablate", "TESP and its five ablations over the config seeds");
  add_run_flags(ablate, flags);
  auto* compare = app.add_subcommand("compare", "tesp, maml, meta_sgd and adapt_sv over the config seeds");
  add_run_flags(compare, flags);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  gradcheck->add_option("--seed", flags.seed, "probe seed");

  auto* export_tasks = app.add_subcommand("export-tasks", "write the sampled task sets");
  export_tasks->add_option("--config", flags.config, "run configuration file");
  export_tasks->add_option("--seed", flags.seed, "run seed");
  export_tasks->add_option("--output", flags.output, "directory for tasks_<split>.tsv (default: stdout)");
  export_tasks->add_option("--split", flags.split, "only this split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(flags);
    if (*eval) return cmd_eval(flags);
    if (*ablate) return cmd_suite(flags, true);
    if (*compare) return cmd_suite(flags, false);
    if (*gradcheck) return cmd_gradcheck(flags);
    if (*export_tasks) return cmd_export(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metarl/harness/config.hpp"
#include "metarl/harness/records.hpp"
#include "metarl/rlopt/rlopt.hpp"
#include "metarl/tesp/learner.hpp"

namespace metarl::harness {

// Run state at a meta-iteration. All randomness is derived from
// (seed, stream, task, iteration), so no generator state needs saving.
struct Checkpoint {
  std::string learner;  // LearnerSpec::name
  std::uint64_t seed = 0;
  std::uint64_t meta_iteration = 0;
  nets::ParameterStore params;
  rlopt::MetaOptState opt;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
// Written to a temporary name and renamed, so a crash never leaves a torn file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::filesystem::path checkpoint_path(const std::filesystem::path& output, std::uint64_t meta_iteration);

struct TaskSets {
  std::vector<envs::TaskSpec> train;
  std::vector<envs::TaskSpec> iid_test;
  std::vector<envs::TaskSpec> ood_test;

  const std::vector<envs::TaskSpec>& of(envs::Region region) const;
};

TaskSets make_task_sets(const RunConfig& config);

struct EvalOptions {
  bool deterministic = false;
  std::size_t workers = 1;
  // When set, the final episodes of every task are appended here.
  std::ostream* episode_dump = nullptr;
};

// Adapts to every task of `tasks` from `meta` and records the distance
// return of the final episodes (control cost excluded) and |h^{K+1}|.
EvalRecord evaluate(const tesp::Learner& learner, const nets::ParameterStore& meta,
                    std::span<const envs::TaskSpec> tasks, envs::Region split, std::uint64_t seed,
                    std::size_t meta_iteration, const EvalOptions& options = {});

// Loads a checkpoint written under `config` and evaluates one split.
EvalRecord evaluate_checkpoint(const RunConfig& config, const std::filesystem::path& checkpoint,
                               envs::Region split);

struct IterationStats {
  std::size_t meta_iteration = 0;
  double objective = 0.0;
  double rl_loss = 0.0;
  double penalty = 0.0;
  double train_return = 0.0;  // mean distance return of the batch's final episodes
  double embedding_norm = 0.0;
  double grad_norm = 0.0;
};

struct TrainOptions {
  // Continue from this checkpoint (must belong to the same config and seed).
  std::optional<std::filesystem::path> resume;
  std::function<void(const IterationStats&)> on_iteration;
  std::function<void(const EvalRecord&)> on_eval;
};

struct TrainResult {
  std::filesystem::path output;
  std::vector<EvalRecord> records;
  Checkpoint final_state;
};

// TESP_OUTPUT_DIR if set, else config.output. Applied by the command line
// front end; train_loop itself writes to config.output.
std::filesystem::path output_directory(const RunConfig& config);

// Meta-training loop. Writes into config.output:
//   config.ini, tasks_<split>.tsv, train_log.tsv, eval_records.tsv,
//   curve_<split>.tsv, checkpoints/ckpt_<iteration>.bin
// A non-finite meta-objective or gradient aborts with std::runtime_error;
// checkpoints already written are kept.
TrainResult train_loop(const RunConfig& config, const TrainOptions& options = {});

// Rewrites curve_<split>.tsv for every split present in `records`.
void emit_curves(const std::filesystem::path& directory, std::span<const EvalRecord> records);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace metarl::harness

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "metarl/envs/envs.hpp"

namespace metarl::harness {

struct TaskRecord {
  std::int64_t task_id = 0;
  // Sum over timesteps of the distance reward, averaged over the task's final episodes.
  double distance_return = 0.0;
  double embedding_norm = 0.0;  // |h^{K+1}|, 0 for methods without an embedding
};

struct EvalRecord {
  std::size_t meta_iteration = 0;
  envs::Region split = envs::Region::train;
  double mean_return = 0.0;
  std::vector<TaskRecord> tasks;

  double std_over_tasks() const;
  double mean_embedding_norm() const;
};

// Rounds to the 9 significant digits used by every text output, so values
// survive a write / read cycle unchanged.
double quantize(double value);
std::string format_number(double value);

// Builds a record from per-task values; quantizes them and sets the mean.
EvalRecord make_record(std::size_t meta_iteration, envs::Region split, std::vector<TaskRecord> tasks);

// Long format: meta_iteration, split, task_id, distance_return, embedding_norm.
void write_eval_records(std::ostream& out, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_eval_records(std::istream& in);

// meta_iteration, mean_return, std_over_tasks for one split, in record order.
std::string format_curve(std::span<const EvalRecord> records, envs::Region split);

// A finished run as seen by the comparison tables.
struct RunRecords {
  std::string label;  // method or ablation name
  std::uint64_t seed = 0;
  std::vector<EvalRecord> records;
};

// label, meta_iteration, mean_over_seeds, std_over_seeds, seeds for one
// split; runs sharing a label are pooled.
std::string format_comparison(std::span<const RunRecords> runs, envs::Region split);

// One row per label with the final evaluation on every split, averaged over
// seeds: label, seeds, D, D_std, D_prime, ..., embedding_norm.
std::string format_final_table(std::span<const RunRecords> runs);

}  // namespace metarl::harness

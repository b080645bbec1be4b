#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metarl/diff/gradcheck.hpp"
#include "metarl/harness/config.hpp"
#include "metarl/harness/records.hpp"

namespace metarl::harness {

struct SuiteEntry {
  std::string label;
  RunConfig config;  // output and seed are filled in per run
};

// tesp, maml, meta_sgd, adapt_sv sharing every other setting of `base`.
std::vector<SuiteEntry> comparison_entries(const RunConfig& base);
// TESP and its five ablations.
std::vector<SuiteEntry> ablation_entries(const RunConfig& base);

struct SuiteOptions {
  // Load a run instead of training it when its directory already holds the
  // same config echo and a final checkpoint.
  bool reuse = false;
  std::function<void(const std::string& label, std::uint64_t seed)> on_run;
};

// Trains every entry for every seed of base.seeds into
// <output>/<label>/seed_<seed>/, then writes <output>/comparison_<split>.tsv
// and <output>/final_table.tsv.
std::vector<RunRecords> run_suite(const RunConfig& base, std::span<const SuiteEntry> entries,
                                  const std::filesystem::path& output, const SuiteOptions& options = {});

struct GradCheckCase {
  std::string name;
  diff::GradCheckResult result;
};

// Finite-difference checks of every op kind, the networks, the policy
// losses and the full meta objective on small random instances.
std::vector<GradCheckCase> run_gradcheck_suites(std::uint64_t seed);

}  // namespace metarl::harness

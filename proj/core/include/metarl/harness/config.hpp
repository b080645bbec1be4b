#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "metarl/envs/envs.hpp"
#include "metarl/rlopt/rlopt.hpp"
#include "metarl/tesp/tesp.hpp"

namespace metarl::harness {

enum class Method { tesp, maml, meta_sgd, adapt_sv };

Method parse_method(const std::string& text);
std::string method_name(Method method);

// Everything that determines a run. Serialized as sectioned key = value text
// ([run], [training], [adapt], [objective], [optimizer], [nets], [env]).
struct RunConfig {
  Method method = Method::tesp;
  tesp::Variant variant = tesp::Variant::none;
  std::string env = "point_nav";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};  // used by compare / ablate
  std::string output = "runs/default";
  std::size_t workers = 0;  // 0: one worker per task in the batch
  bool deterministic_eval = false;
  bool dump_episodes = false;

  std::size_t meta_updates = 500;
  std::size_t task_batch = 10;
  std::size_t eval_every = 25;
  std::size_t train_tasks = 100;
  std::size_t eval_tasks = 100;

  tesp::AdaptSizes adapt;
  double maml_alpha = 0.05;
  tesp::ObjectiveSettings objective;
  rlopt::AdamSettings optimizer;
  tesp::NetSizes nets;
  envs::EnvConstants env_constants;

  void validate() const;
  std::size_t worker_count() const { return workers == 0 ? task_batch : workers; }
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Round-trips through parse_config exactly (shortest round-trip decimals).
std::string to_ini(const RunConfig& config);

envs::Environment make_environment(const RunConfig& config);
tesp::LearnerSpec make_learner_spec(const RunConfig& config);
tesp::Learner make_learner(const RunConfig& config);

}  // namespace metarl::harness

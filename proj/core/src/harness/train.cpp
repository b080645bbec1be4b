#include "metarl/harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "metarl/util/binary_io.hpp"
#include "metarl/util/worker_pool.hpp"

namespace metarl::harness {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'M', 'E', 'T', 'A', 'R', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

const envs::Region kSplits[] = {envs::Region::train, envs::Region::iid_test, envs::Region::ood_test};

double mean_distance_return(std::span<const rollout::Episode> episodes) {
  double s = 0.0;
  for (const rollout::Episode& ep : episodes) s += ep.distance_return();
  return s / static_cast<double>(episodes.size());
}

std::string stats_row(const IterationStats& s) {
  return fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.meta_iteration, format_number(s.objective),
                     format_number(s.rl_loss), format_number(s.penalty), format_number(s.train_return),
                     format_number(s.embedding_norm), format_number(s.grad_norm));
}

constexpr const char* kLogHeader = "meta_iteration\tobjective\trl_loss\tpenalty\ttrain_return\tembedding_norm\tgrad_norm\n";

// Lines of an earlier log up to and including `iteration`.
std::string truncated_log(const fs::path& path, std::uint64_t iteration) {
  std::string out = kLogHeader;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find('\t'))) <= iteration) out += line + "\n";
  }
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kMagic, sizeof kMagic);
  io::write_u32(out, kVersion);
  io::write_string(out, checkpoint.learner);
  io::write_u64(out, checkpoint.seed);
  io::write_u64(out, checkpoint.meta_iteration);
  nets::write_parameters(out, checkpoint.params);
  rlopt::write_opt_state(out, checkpoint.opt);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  io::read_exact(in, magic, sizeof magic);
  if (!std::equal(magic, magic + sizeof magic, kMagic)) throw std::runtime_error("checkpoint: bad magic");
  const std::uint32_t version = io::read_u32(in);
  if (version != kVersion) throw std::runtime_error(fmt::format("checkpoint: unsupported version {}", version));
  Checkpoint c;
  c.learner = io::read_string(in);
  c.seed = io::read_u64(in);
  c.meta_iteration = io::read_u64(in);
  c.params = nets::read_parameters(in);
  c.opt = rlopt::read_opt_state(in);
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    write_checkpoint(out, checkpoint);
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

fs::path checkpoint_path(const fs::path& output, std::uint64_t meta_iteration) {
  return output / "checkpoints" / fmt::format("ckpt_{:06d}.bin", meta_iteration);
}

const std::vector<envs::TaskSpec>& TaskSets::of(envs::Region region) const {
  switch (region) {
    case envs::Region::train:
      return train;
    case envs::Region::iid_test:
      return iid_test;
    case envs::Region::ood_test:
      return ood_test;
  }
  throw std::logic_error("unhandled region");
}

TaskSets make_task_sets(const RunConfig& config) {
  const envs::EnvId env = envs::EnvId::parse(config.env);
  TaskSets t;
  t.train = envs::sample_task_set(env, config.train_tasks, envs::Region::train, config.seed, config.env_constants);
  t.iid_test = envs::sample_task_set(env, config.eval_tasks, envs::Region::iid_test, config.seed, config.env_constants);
  t.ood_test = envs::sample_task_set(env, config.eval_tasks, envs::Region::ood_test, config.seed, config.env_constants);
  return t;
}

EvalRecord evaluate(const tesp::Learner& learner, const nets::ParameterStore& meta,
                    std::span<const envs::TaskSpec> tasks, envs::Region split, std::uint64_t seed,
                    std::size_t meta_iteration, const EvalOptions& options) {
  learner.check_compatible(meta);
  std::vector<TaskRecord> per_task(tasks.size());
  std::vector<std::vector<rollout::Episode>> finals(options.episode_dump ? tasks.size() : 0);
  const rollout::SampleOptions sample{options.deterministic};
  parallel_for(tasks.size(), options.workers, [&](std::size_t i) {
    const envs::TaskSpec& task = tasks[i];
    Rng rng = make_rng(seed, Stream::eval, {static_cast<std::uint64_t>(task.task_id), meta_iteration});
    tesp::AdaptResult r = learner.adapt(meta, task, rng, sample);
    per_task[i] = TaskRecord{task.task_id, mean_distance_return(r.final_episodes), r.embedding.l2_norm()};
    if (options.episode_dump) finals[i] = std::move(r.final_episodes);
  });
  if (options.episode_dump) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      rollout::write_episodes(*options.episode_dump, tasks[i].task_id, meta_iteration, finals[i]);
    }
  }
  return make_record(meta_iteration, split, std::move(per_task));
}

EvalRecord evaluate_checkpoint(const RunConfig& config, const fs::path& checkpoint, envs::Region split) {
  const tesp::Learner learner = make_learner(config);
  const Checkpoint c = load_checkpoint(checkpoint);
  if (c.learner != learner.spec().name) {
    throw std::invalid_argument("checkpoint was written by learner '" + c.learner + "', config selects '" +
                                learner.spec().name + "'");
  }
  const TaskSets sets = make_task_sets(config);
  EvalOptions opts;
  opts.deterministic = config.deterministic_eval;
  opts.workers = config.worker_count();
  return evaluate(learner, c.params, sets.of(split), split, config.seed, c.meta_iteration, opts);
}

fs::path output_directory(const RunConfig& config) {
  if (const char* env = std::getenv("TESP_OUTPUT_DIR"); env != nullptr && *env != '\0') return fs::path(env);
  return fs::path(config.output);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit_curves(const fs::path& directory, std::span<const EvalRecord> records) {
  for (envs::Region split : kSplits) {
    bool present = false;
    for (const EvalRecord& r : records) present = present || r.split == split;
    if (present) write_text(directory / ("curve_" + envs::region_name(split) + ".tsv"), format_curve(records, split));
  }
}

TrainResult train_loop(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const fs::path out = config.output;
  fs::create_directories(out / "checkpoints");
  write_text(out / "config.ini", to_ini(config));

  const TaskSets sets = make_task_sets(config);
  for (envs::Region split : kSplits) {
    std::ostringstream ss;
    envs::write_task_set(ss, sets.of(split));
    write_text(out / ("tasks_" + envs::region_name(split) + ".tsv"), ss.str());
  }

  const tesp::Learner learner = make_learner(config);
  TrainResult result;
  result.output = out;
  Checkpoint& state = result.final_state;
  state.learner = learner.spec().name;
  state.seed = config.seed;
  std::string log = kLogHeader;

  if (options.resume) {
    state = load_checkpoint(*options.resume);
    if (state.learner != learner.spec().name || state.seed != config.seed) {
      throw std::invalid_argument(fmt::format("resume: checkpoint belongs to learner '{}' seed {}, config is '{}' seed {}",
                                              state.learner, state.seed, learner.spec().name, config.seed));
    }
    learner.check_compatible(state.params);
    if (fs::exists(out / "eval_records.tsv")) {
      std::ifstream in(out / "eval_records.tsv");
      for (EvalRecord& r : read_eval_records(in)) {
        if (r.meta_iteration <= state.meta_iteration) result.records.push_back(std::move(r));
      }
    }
    log = truncated_log(out / "train_log.tsv", state.meta_iteration);
  } else {
    Rng init = make_rng(config.seed, Stream::init);
    state.params = learner.initialize(init);
    state.opt = rlopt::MetaOptState::zeros_like(state.params, config.optimizer);
  }
  write_text(out / "train_log.tsv", log);

  const std::size_t workers = config.worker_count();
  std::vector<std::size_t> order(sets.train.size());
  for (std::size_t it = state.meta_iteration + 1; it <= config.meta_updates; ++it) {
    Rng batch_rng = make_rng(config.seed, Stream::batch, {it});
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < config.task_batch; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(batch_rng)]);
    }

    std::vector<tesp::MetaGradient> grads(config.task_batch);
    std::vector<double> returns(config.task_batch);
    std::vector<double> norms(config.task_batch);
    try {
      parallel_for(config.task_batch, workers, [&](std::size_t b) {
        const envs::TaskSpec& task = sets.train[order[b]];
        Rng rng = make_rng(config.seed, Stream::adapt, {static_cast<std::uint64_t>(task.task_id), it});
        const tesp::AdaptResult r = learner.adapt(state.params, task, rng);
        grads[b] = learner.meta_gradient(state.params, r);
        returns[b] = mean_distance_return(r.final_episodes);
        norms[b] = r.embedding.l2_norm();
      });

      IterationStats stats;
      stats.meta_iteration = it;
      nets::ParameterStore total = grads[0].grads;
      for (std::size_t b = 0; b < grads.size(); ++b) {
        if (!std::isfinite(grads[b].objective)) {
          throw std::domain_error(fmt::format("non-finite meta-objective on task {}", sets.train[order[b]].task_id));
        }
        if (b > 0) {
          for (const auto& [name, g] : grads[b].grads) {
            nets::Array& acc = total.mutable_at(name);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
          }
        }
        stats.objective += grads[b].objective;
        stats.rl_loss += grads[b].rl_loss;
        stats.penalty += grads[b].penalty;
        stats.train_return += returns[b] / static_cast<double>(config.task_batch);
        stats.embedding_norm += norms[b] / static_cast<double>(config.task_batch);
      }
      stats.grad_norm = total.l2_norm();
      rlopt::meta_step(state.params, total, state.opt);
      state.meta_iteration = it;
      log += stats_row(stats);
      if (options.on_iteration) options.on_iteration(stats);
    } catch (const std::domain_error& e) {
      const std::size_t last = (it - 1) / config.eval_every * config.eval_every;
      write_text(out / "train_log.tsv", log);
      throw std::runtime_error(fmt::format("meta-iteration {}: {}; last good checkpoint: {}", it, e.what(),
                                           last == 0 ? std::string("none") : checkpoint_path(out, last).string()));
    }

    if (it % config.eval_every == 0 || it == config.meta_updates) {
      EvalOptions eval;
      eval.deterministic = config.deterministic_eval;
      eval.workers = workers;
      std::ofstream dump;
      if (config.dump_episodes) {
        dump.open(out / fmt::format("episodes_{:06d}.tsv", it), std::ios::trunc);
        eval.episode_dump = &dump;
      }
      for (envs::Region split : kSplits) {
        result.records.push_back(evaluate(learner, state.params, sets.of(split), split, config.seed, it, eval));
        if (options.on_eval) options.on_eval(result.records.back());
      }
      save_checkpoint(checkpoint_path(out, it), state);
      std::ostringstream records;
      write_eval_records(records, result.records);
      write_text(out / "eval_records.tsv", records.str());
      emit_curves(out, result.records);
      write_text(out / "train_log.tsv", log);
    }
  }
  write_text(out / "train_log.tsv", log);
  return result;
}

}  // namespace metarl::harness

// Acceptance suite: one PASS/FAIL line per criterion. Long training runs are
// cached under METARL_ACCEPTANCE_CACHE (reused when the config echo matches).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metarl/baselines/baselines.hpp"
#include "metarl/harness/config.hpp"
#include "metarl/harness/suite.hpp"
#include "metarl/harness/train.hpp"

using namespace metarl;
using namespace metarl::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Sample standard deviation (n - 1).
double sample_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + fmt::format("{:.4g}", x);
  return out;
}

fs::path cache_root() {
  if (const char* env = std::getenv("METARL_ACCEPTANCE_CACHE"); env && *env) return env;
  return METARL_ACCEPTANCE_CACHE;
}

// ---------------------------------------------------------------- criterion 1

Outcome gradients() {
  std::size_t probes = 0;
  double worst = 0.0;
  std::string worst_case;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& c : run_gradcheck_suites(seed)) {
      probes += c.result.probes;
      if (c.result.max_relative_error > worst) {
        worst = c.result.max_relative_error;
        worst_case = c.name;
      }
    }
  }
  return {worst < 1e-4 && probes >= 100,
          fmt::format("{} probes over 3 seeds, max relative error {:.3e} ({})", probes, worst, worst_case)};
}

// ---------------------------------------------------------------- criterion 2

rollout::Episode tagged(double ret) {
  rollout::Episode e;
  rollout::Transition t;
  t.reward = ret;
  e.steps.push_back(t);
  e.finalize();
  return e;
}

Outcome buffer_oracle() {
  constexpr std::size_t kN = 8, kM = 4, kRounds = 5, kSequences = 200;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> real(-30.0, 0.0);
  std::uniform_int_distribution<int> coarse(-6, 0);
  std::size_t mismatches = 0;
  for (std::size_t s = 0; s < kSequences; ++s) {
    rollout::EpisodeBuffer buffer(kM);
    std::vector<double> history;
    const bool ties = s % 2 == 1;  // half the sequences use integer returns to force ties
    for (std::size_t round = 0; round < kRounds; ++round) {
      std::vector<rollout::Episode> batch;
      for (std::size_t i = 0; i < kN; ++i) {
        const double r = ties ? coarse(rng) : real(rng);
        batch.push_back(tagged(r));
        history.push_back(r);
      }
      buffer.update(batch);
      // Brute force: rank the whole history, earliest offer wins ties.
      std::vector<std::uint64_t> idx(history.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::uint64_t a, std::uint64_t b) {
        return history[a] != history[b] ? history[a] > history[b] : a < b;
      });
      idx.resize(std::min<std::size_t>(kM, idx.size()));
      if (buffer.insertion_ids() != idx) ++mismatches;
    }
  }
  return {mismatches == 0,
          fmt::format("{} sequences x {} rounds (N={}, M={}), {} mismatching buffer states", kSequences, kRounds, kN,
                      kM, mismatches)};
}

// ---------------------------------------------------------------- criteria 3, 4, 5, 10

RunConfig protocol_config() {
  RunConfig c;  // desk-scale defaults: K=3, N=8, M=4, H=32
  c.workers = 1;
  return c;
}

double policy_change(const nets::ParameterStore& meta, const tesp::AdaptResult& r) {
  double sq = 0.0;
  for (const auto& [name, value] : meta) {
    if (!name.starts_with("policy.")) continue;
    const diff::Array& after = r.fast_params.contains(name) ? r.fast_params.at(name) : value;
    for (std::size_t i = 0; i < value.size(); ++i) sq += (after[i] - value[i]) * (after[i] - value[i]);
  }
  return std::sqrt(sq);
}

// Replays the final round with the pre-adaptation policy under mean actions.
bool final_round_uses_meta_policy(const tesp::Learner& l, const nets::ParameterStore& meta,
                                  const tesp::AdaptResult& r) {
  Rng unused(0);
  const auto replay = rollout::sample_episodes(l.environment(), r.task, {&meta, &l.spec().policy}, r.embedding,
                                               l.spec().episodes_per_round, unused, {.deterministic = true});
  for (std::size_t i = 0; i < replay.size(); ++i)
    for (std::size_t t = 0; t < replay[i].size(); ++t)
      if (replay[i].steps[t].action != r.final_episodes[i].steps[t].action) return false;
  return true;
}

Outcome shared_policy() {
  constexpr std::size_t kCalls = 50;
  const RunConfig base = protocol_config();
  const envs::Environment env = make_environment(base);
  std::map<std::string, std::pair<std::size_t, double>> stats;  // label -> (violations, min/max change)
  for (Method m : {Method::tesp, Method::adapt_sv, Method::maml, Method::meta_sgd}) {
    RunConfig c = base;
    c.method = m;
    const tesp::Learner l = make_learner(c);
    const bool shared = m == Method::tesp || m == Method::adapt_sv;
    std::size_t violations = 0;
    double extreme = shared ? 0.0 : INFINITY;
    for (std::size_t call = 0; call < kCalls; ++call) {
      Rng init = make_rng(call, Stream::test, {static_cast<std::uint64_t>(m)});
      const nets::ParameterStore meta = l.initialize(init);
      const auto tasks = envs::sample_task_set(env.id(), 1, envs::Region::train, 1000 + call, c.env_constants);
      Rng rng = make_rng(call, Stream::test, {77});
      const bool deterministic = shared && call % 2 == 1;
      const tesp::AdaptResult r = l.adapt(meta, tasks[0], rng, {.deterministic = deterministic});
      const double change = policy_change(meta, r);
      if (shared) {
        const bool ok = change == 0.0 && (!deterministic || final_round_uses_meta_policy(l, meta, r));
        violations += ok ? 0 : 1;
        extreme = std::max(extreme, change);
      } else {
        violations += change > 0.0 ? 0 : 1;
        extreme = std::min(extreme, change);
      }
    }
    stats[method_name(m)] = {violations, extreme};
  }
  bool pass = true;
  std::string detail = fmt::format("{} calls each, K=3:", kCalls);
  for (const auto& [label, s] : stats) {
    pass = pass && s.first == 0;
    const bool shared = label == "tesp" || label == "adapt_sv";
    detail += fmt::format(" {} {} |dpolicy|={:.3g} ({} violations);", label, shared ? "max" : "min", s.second, s.first);
  }
  return {pass, detail};
}

Outcome structure() {
  const RunConfig c = protocol_config();
  const tesp::Learner l = make_learner(c);
  const envs::Environment env = make_environment(c);
  std::size_t bad = 0;
  constexpr std::size_t kTrials = 10;
  for (std::size_t trial = 0; trial < kTrials; ++trial) {
    Rng init = make_rng(trial, Stream::test, {4});
    const nets::ParameterStore meta = l.initialize(init);
    const auto tasks = envs::sample_task_set(env.id(), 1, envs::Region::train, 50 + trial, c.env_constants);
    Rng rng = make_rng(trial, Stream::test, {5});
    const tesp::AdaptResult r = l.adapt(meta, tasks[0], rng);
    const auto& tr = r.trace;
    const std::size_t n = l.spec().episodes_per_round;
    bool ok = tr.warmup_rounds == 1 && tr.fast_update_rounds == 3 && tr.final_rounds == 1 &&
              tr.episodes_sampled == 5 * n && tr.sampling_embeddings.size() == 5 && r.fast_grads.size() == 3;
    ok = ok && tr.sampling_embeddings[0] == diff::Array(diff::Shape{l.spec().encoder.embed_dim}, 0.0);
    // h^{K+1}: encoder with the adapted parameters applied to the final buffer.
    nets::ParameterStore adapted = meta;
    for (const auto& [name, v] : r.fast_params) adapted.set(name, v);
    diff::Tape tape;
    const diff::Array h = l.embedding(nets::bind_constants(tape, adapted), *r.buffer).value();
    ok = ok && h == r.embedding && tr.sampling_embeddings[4] == r.embedding && r.buffer->size() == c.adapt.buffer_capacity;
    bad += ok ? 0 : 1;
  }
  return {bad == 0, fmt::format("{} adapt() calls, K=3: 1 warm-up + 3 fast-update + 1 final round, zero warm-up "
                                "embedding, h^(K+1) from final buffer; {} violations",
                                kTrials, bad)};
}

Outcome alpha_zero() {
  RunConfig c = protocol_config();
  c.variant = tesp::Variant::v4_alpha_zero;
  const tesp::Learner l = make_learner(c);
  const envs::Environment env = make_environment(c);
  const auto tasks = envs::sample_task_set(env.id(), 20, envs::Region::iid_test, 9, c.env_constants);
  std::size_t bad = 0;
  double max_return_gap = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Rng init = make_rng(i, Stream::test, {6});
    const nets::ParameterStore meta = l.initialize(init);
    Rng rng = make_rng(i, Stream::test, {7});
    const tesp::AdaptResult r = l.adapt(meta, tasks[i], rng, {.deterministic = true});
    // Before adaptation: the meta encoder applied to the same buffer, then
    // the same policy under mean actions.
    diff::Tape tape;
    const diff::Array h_before = l.embedding(nets::bind_constants(tape, meta), *r.buffer).value();
    Rng unused(0);
    const auto before = rollout::sample_episodes(env, tasks[i], {&meta, &l.spec().policy}, h_before,
                                                 l.spec().episodes_per_round, unused, {.deterministic = true});
    bool same = h_before == r.embedding;
    for (std::size_t e = 0; e < before.size(); ++e) {
      for (std::size_t t = 0; t < before[e].size(); ++t) same = same && before[e].steps[t].action == r.final_episodes[e].steps[t].action;
      max_return_gap = std::max(max_return_gap, std::abs(before[e].return_ - r.final_episodes[e].return_));
    }
    for (const auto& [name, v] : r.fast_params) same = same && v == meta.at(name);
    bad += same ? 0 : 1;
  }
  return {bad == 0, fmt::format("{} tasks, deterministic eval: identical action sequences before/after adaptation "
                                "({} mismatches, max return gap {:.3g})",
                                tasks.size(), bad, max_return_gap)};
}

Outcome reduction_identity() {
  constexpr std::size_t kTrials = 20;
  std::size_t bad = 0;
  std::mt19937_64 pick(10);
  std::uniform_real_distribution<double> rate(0.001, 0.3);
  for (std::size_t trial = 0; trial < kTrials; ++trial) {
    const double c = rate(pick);
    RunConfig maml_cfg = protocol_config();
    maml_cfg.method = Method::maml;
    maml_cfg.maml_alpha = c;
    RunConfig sgd_cfg = protocol_config();
    sgd_cfg.method = Method::meta_sgd;
    const tesp::Learner maml = make_learner(maml_cfg);
    const tesp::Learner sgd = make_learner(sgd_cfg);
    Rng i1 = make_rng(trial, Stream::test, {10}), i2 = make_rng(trial, Stream::test, {10});
    const nets::ParameterStore pm = maml.initialize(i1);
    nets::ParameterStore ps = sgd.initialize(i2);
    for (const std::string& name : ps.names_with_prefix("meta.alpha."))
      ps.set(name, diff::Array(ps.at(name).shape(), c));
    const auto task = envs::sample_task_set(make_environment(maml_cfg).id(), 1, envs::Region::train, trial,
                                            maml_cfg.env_constants)[0];
    Rng a = make_rng(trial, Stream::test, {11}), b = make_rng(trial, Stream::test, {11});
    const tesp::AdaptResult rm = baselines::maml_adapt(maml, pm, task, a);
    const tesp::AdaptResult rs = baselines::meta_sgd_adapt(sgd, ps, task, b);
    bad += rm.fast_params == rs.fast_params ? 0 : 1;
  }
  return {bad == 0, fmt::format("{} trials with random tied rates: {} adapted-parameter mismatches", kTrials, bad)};
}

// ---------------------------------------------------------------- criterion 9

Outcome determinism() {
  RunConfig c = protocol_config();
  c.meta_updates = 6;
  c.eval_every = 3;
  c.train_tasks = 20;
  c.eval_tasks = 10;
  const fs::path root = cache_root() / "determinism";
  fs::remove_all(root);
  std::vector<fs::path> dirs;
  for (auto [name, workers] : {std::pair{"w1_a", 1}, std::pair{"w1_b", 1}, std::pair{"w10", 10}}) {
    RunConfig r = c;
    r.workers = static_cast<std::size_t>(workers);
    r.output = (root / name).string();
    train_loop(r);
    dirs.push_back(r.output);
  }
  std::vector<std::string> files{"curve_D.tsv", "curve_D_prime.tsv", "curve_D_double_prime.tsv", "eval_records.tsv",
                                 "train_log.tsv"};
  for (const auto& entry : fs::directory_iterator(dirs[0] / "checkpoints"))
    files.push_back("checkpoints/" + entry.path().filename().string());
  std::size_t differing = 0;
  for (const std::string& f : files) {
    const std::string ref = read_text(dirs[0] / f);
    for (std::size_t i = 1; i < dirs.size(); ++i) differing += read_text(dirs[i] / f) == ref ? 0 : 1;
  }
  return {differing == 0, fmt::format("{} files compared across runs (workers 1, 1, 10): {} differ", files.size(),
                                      differing)};
}

// ---------------------------------------------------------------- criteria 6, 7, 8

struct Runs {
  std::vector<RunRecords> tesp, maml, adapt_sv, tesp_eta0;
};

const EvalRecord& record_at(const RunRecords& r, std::size_t iteration, envs::Region split) {
  for (const EvalRecord& e : r.records)
    if (e.meta_iteration == iteration && e.split == split) return e;
  throw std::runtime_error(fmt::format("{} seed {}: no evaluation at iteration {}", r.label, r.seed, iteration));
}

Runs train_suites() {
  RunConfig base = protocol_config();  // 500 meta-updates, batch 10, eval every 25, seeds 1..3
  SuiteOptions opts;
  opts.reuse = true;
  opts.on_run = [](const std::string& label, std::uint64_t seed) {
    std::cerr << fmt::format("[acceptance] {} seed {}\n", label, seed);
  };
  Runs out;
  const auto cmp = comparison_entries(base);
  const std::vector<SuiteEntry> main{cmp[0], cmp[1], cmp[3]};  // tesp, maml, adapt_sv
  for (RunRecords& r : run_suite(base, main, cache_root() / "comparison", opts)) {
    if (r.label == "tesp") out.tesp.push_back(std::move(r));
    else if (r.label == "maml") out.maml.push_back(std::move(r));
    else out.adapt_sv.push_back(std::move(r));
  }
  RunConfig eta0 = base;
  eta0.meta_updates = 300;
  eta0.objective.eta = 0.0;
  const std::vector<SuiteEntry> reg{{"tesp_eta0", eta0}};
  out.tesp_eta0 = run_suite(eta0, reg, cache_root() / "regularizer", opts);
  return out;
}

Outcome regularizer(const Runs& runs) {
  std::vector<double> with, without;
  for (const auto& r : runs.tesp) with.push_back(record_at(r, 300, envs::Region::train).mean_embedding_norm());
  for (const auto& r : runs.tesp_eta0) without.push_back(record_at(r, 300, envs::Region::train).mean_embedding_norm());
  return {mean(with) < mean(without),
          fmt::format("mean |h^(K+1)| at iteration 300 on D: eta=0.01 {:.4g} [{}] vs eta=0 {:.4g} [{}]", mean(with),
                      join(with), mean(without), join(without))};
}

Outcome generalization(const Runs& runs) {
  auto finals = [](const std::vector<RunRecords>& rs, envs::Region split) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(record_at(r, 500, split).mean_return);
    return v;
  };
  const auto d = finals(runs.tesp, envs::Region::train);
  const auto dp = finals(runs.tesp, envs::Region::iid_test);
  const auto t_ood = finals(runs.tesp, envs::Region::ood_test);
  const auto m_ood = finals(runs.maml, envs::Region::ood_test);
  const auto a_ood = finals(runs.adapt_sv, envs::Region::ood_test);
  const double gap = std::abs(mean(dp) - mean(d)) / std::abs(mean(d));
  const bool a = gap <= 0.15;
  auto beats = [&](const std::vector<double>& other) {
    const double margin = mean(t_ood) - mean(other);
    return margin > std::max(sample_std(t_ood), sample_std(other));
  };
  const bool b_maml = beats(m_ood), b_sv = beats(a_ood);
  return {a && b_maml && b_sv,
          fmt::format("(a) TESP D {:.4g} vs D' {:.4g}: gap {:.1f}% (<= 15%: {}); (b) D'' TESP {:.4g}+-{:.3g}, "
                      "MAML {:.4g}+-{:.3g} ({}), AdaptSV {:.4g}+-{:.3g} ({}) [mean+-sample std over 3 seeds]",
                      mean(d), mean(dp), 100.0 * gap, a ? "yes" : "no", mean(t_ood), sample_std(t_ood), mean(m_ood),
                      sample_std(m_ood), b_maml ? "beaten" : "NOT beaten", mean(a_ood), sample_std(a_ood),
                      b_sv ? "beaten" : "NOT beaten")};
}

Outcome learning_signal(const Runs& runs) {
  std::size_t improved = 0;
  std::string detail;
  for (const auto& r : runs.tesp) {
    std::vector<double> curve;
    for (const EvalRecord& e : r.records)
      if (e.split == envs::Region::train) curve.push_back(e.mean_return);
    if (curve.size() < 20) throw std::runtime_error("learning curve has fewer than 20 evaluations");
    const double early = (curve[0] + curve[1] + curve[2] + curve[3]) / 4.0;
    const double late = (curve[16] + curve[17] + curve[18] + curve[19]) / 4.0;
    improved += early < late ? 1 : 0;
    detail += fmt::format(" seed {}: {:.4g} -> {:.4g};", r.seed, early, late);
  }
  return {improved >= 2, fmt::format("{}/3 seeds improve (evals 1-4 vs 17-20 on D):{}", improved, detail)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  Runs runs;
  bool trained = false;
  auto with_runs = [&](std::function<Outcome(const Runs&)> f) {
    return [&runs, &trained, f]() {
      if (!trained) {
        runs = train_suites();
        trained = true;
      }
      return f(runs);
    };
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradients},
      {2, "buffer oracle equivalence", buffer_oracle},
      {3, "shared-policy invariance", shared_policy},
      {4, "adaptation structure", structure},
      {5, "alpha = 0 nullity", alpha_zero},
      {6, "regularizer direction", with_runs(regularizer)},
      {7, "generalization D / D' / D''", with_runs(generalization)},
      {8, "learning signal", with_runs(learning_signal)},
      {9, "determinism", determinism},
      {10, "baseline reduction identity", reduction_identity},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("criterion {:>2} {:<30} {}  ({:.1f}s)  {}\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                             o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

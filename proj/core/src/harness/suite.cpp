#include "metarl/harness/suite.hpp"

#include <fstream>
#include <random>

#include <fmt/format.h>

#include "metarl/baselines/baselines.hpp"
#include "metarl/diff/ops.hpp"
#include "metarl/harness/train.hpp"
#include "metarl/rlopt/rlopt.hpp"

namespace metarl::harness {

namespace fs = std::filesystem;
using diff::Array;
using diff::Shape;
using diff::Tape;
using diff::Var;

std::vector<SuiteEntry> comparison_entries(const RunConfig& base) {
  std::vector<SuiteEntry> out;
  for (Method m : {Method::tesp, Method::maml, Method::meta_sgd, Method::adapt_sv}) {
    RunConfig c = base;
    c.method = m;
    c.variant = tesp::Variant::none;
    out.push_back({method_name(m), c});
  }
  return out;
}

std::vector<SuiteEntry> ablation_entries(const RunConfig& base) {
  std::vector<SuiteEntry> out;
  for (tesp::Variant v : tesp::all_variants()) {
    RunConfig c = base;
    c.method = Method::tesp;
    c.variant = v;
    out.push_back({v == tesp::Variant::none ? "tesp" : tesp::variant_name(v), c});
  }
  return out;
}

std::vector<RunRecords> run_suite(const RunConfig& base, std::span<const SuiteEntry> entries, const fs::path& output,
                                  const SuiteOptions& options) {
  std::vector<RunRecords> runs;
  for (const SuiteEntry& entry : entries) {
    for (std::uint64_t seed : base.seeds) {
      RunConfig c = entry.config;
      c.seed = seed;
      c.output = (output / entry.label / fmt::format("seed_{}", seed)).string();
      if (options.on_run) options.on_run(entry.label, seed);
      RunRecords run{entry.label, seed, {}};
      const fs::path dir = c.output;
      if (options.reuse && fs::exists(checkpoint_path(dir, c.meta_updates)) && fs::exists(dir / "config.ini") &&
          read_text(dir / "config.ini") == to_ini(c) && fs::exists(dir / "eval_records.tsv")) {
        std::ifstream in(dir / "eval_records.tsv");
        run.records = read_eval_records(in);
      } else {
        run.records = train_loop(c).records;
      }
      runs.push_back(std::move(run));
    }
  }
  for (envs::Region split : {envs::Region::train, envs::Region::iid_test, envs::Region::ood_test}) {
    write_text(output / ("comparison_" + envs::region_name(split) + ".tsv"), format_comparison(runs, split));
  }
  write_text(output / "final_table.tsv", format_final_table(runs));
  return runs;
}

namespace {

Array random_array(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Array a(shape, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = u(rng);
  return a;
}

// Reduces an arbitrary-shaped output to a scalar with fixed random weights,
// so every output element contributes a distinct amount.
diff::LossBuilder weighted(std::function<Var(Tape&, std::span<const Var>)> f, const std::vector<Array>& inputs,
                           Rng& rng) {
  Tape scratch;
  std::vector<Var> leaves;
  for (const Array& a : inputs) leaves.push_back(scratch.parameter(a));
  const Shape shape = f(scratch, leaves).shape();
  const Array w = random_array(shape, rng);
  return [f, w](Tape& tape, std::span<const Var> xs) {
    Var out = f(tape, xs);
    if (out.value().size() == 1 && out.shape().size() <= 1) return diff::scale(out, w[0]);
    return diff::sum(diff::mul(out, tape.constant(w)));
  };
}

// Inputs whose entries stay at least `gap` away from each value in `kinks`.
Array away_from(Array a, std::initializer_list<double> kinks, double gap) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (double k : kinks) {
      if (std::abs(a[i] - k) < gap) a[i] = k + (a[i] >= k ? gap : -gap);
    }
  }
  return a;
}

rollout::Episode random_episode(std::size_t length, std::size_t state_dim, std::size_t action_dim, Rng& rng) {
  rollout::Episode ep;
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t t = 0; t < length; ++t) {
    rollout::Transition tr;
    tr.state = random_array(Shape{state_dim}, rng);
    tr.action = random_array(Shape{action_dim}, rng);
    tr.distance_reward = -std::abs(n(rng));
    tr.reward = tr.distance_reward - 0.01 * n(rng) * n(rng);
    tr.logprob = -1.0 + 0.3 * n(rng);
    ep.steps.push_back(tr);
  }
  ep.finalize();
  return ep;
}

struct SmallNets {
  nets::EncoderConfig encoder;
  nets::PolicyConfig policy;
  nets::ParameterStore store;
  std::vector<std::string> names;
};

SmallNets small_nets(Rng& rng) {
  SmallNets s;
  s.encoder.input_dim = 3 + 2 + 1;
  s.encoder.hidden_dim = 5;
  s.encoder.embed_dim = 3;
  s.policy.state_dim = 3;
  s.policy.embed_dim = 3;
  s.policy.hidden = {6, 4};
  s.policy.action_dim = 2;
  nets::init_encoder(s.store, s.encoder, rng);
  nets::init_policy(s.store, s.policy, rng);
  s.store.set("policy.log_std", random_array(Shape{2}, rng, -0.5, 0.5));
  for (const auto& [name, value] : s.store) {
    // Non-zero biases so no gradient is trivially structured.
    if (name.ends_with("bias") || name.ends_with(".b_z") || name.ends_with(".b_r") || name.ends_with(".b_h")) {
      s.store.set(name, random_array(value.shape(), rng, -0.3, 0.3));
    }
    s.names.push_back(name);
  }
  return s;
}

nets::VarMap as_map(const std::vector<std::string>& names, std::span<const Var> leaves) {
  nets::VarMap m;
  for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], leaves[i]);
  return m;
}

std::vector<Array> values_of(const nets::ParameterStore& store) {
  std::vector<Array> out;
  for (const auto& [_, v] : store) out.push_back(v);
  return out;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suites(std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::test, {0});
  std::vector<GradCheckCase> out;
  diff::GradCheckOptions opts;
  opts.seed = seed;
  auto check = [&](const std::string& name, const diff::LossBuilder& loss, const std::vector<Array>& inputs) {
    out.push_back({name, diff::check_gradients(loss, inputs, opts)});
  };
  using Leaves = std::span<const Var>;
  auto unary = [&](const std::string& name, std::function<Var(Var)> f, Array x) {
    const std::vector<Array> in{std::move(x)};
    check(name, weighted([f](Tape&, Leaves v) { return f(v[0]); }, in, rng), in);
  };
  auto binary = [&](const std::string& name, std::function<Var(Var, Var)> f, Array a, Array b) {
    const std::vector<Array> in{std::move(a), std::move(b)};
    check(name, weighted([f](Tape&, Leaves v) { return f(v[0], v[1]); }, in, rng), in);
  };

  binary("op.add", diff::add, random_array({3, 4}, rng), random_array({3, 4}, rng));
  binary("op.sub", diff::sub, random_array({3, 4}, rng), random_array({3, 4}, rng));
  binary("op.mul", diff::mul, random_array({3, 4}, rng), random_array({3, 4}, rng));
  binary("op.matmul", diff::matmul, random_array({3, 4}, rng), random_array({4, 2}, rng));
  binary("op.concat", diff::concat, random_array({2, 3}, rng), random_array({2, 2}, rng));
  {
    Array a = random_array({3, 4}, rng);
    Array b = random_array({3, 4}, rng);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) < 0.05) b[i] = a[i] + 0.1;
    }
    binary("op.maximum", diff::maximum, a, b);
    binary("op.minimum", diff::minimum, a, b);
  }
  unary("op.neg", diff::neg, random_array({5}, rng));
  unary("op.scale", [](Var x) { return diff::scale(x, -1.7); }, random_array({2, 3}, rng));
  unary("op.tanh", diff::tanh, random_array({3, 3}, rng, -2.0, 2.0));
  unary("op.sigmoid", diff::sigmoid, random_array({3, 3}, rng, -3.0, 3.0));
  unary("op.exp", diff::exp, random_array({4}, rng));
  unary("op.log", diff::log, random_array({2, 4}, rng, 0.5, 2.0));
  unary("op.square", diff::square, random_array({6}, rng));
  unary("op.sum", diff::sum, random_array({3, 4}, rng));
  unary("op.mean", diff::mean, random_array({3, 4}, rng));
  unary("op.slice.cols", [](Var x) { return diff::slice(x, 1, 1, 4); }, random_array({3, 5}, rng));
  unary("op.slice.rows", [](Var x) { return diff::slice(x, 0, 1, 3); }, random_array({4, 2}, rng));
  unary("op.broadcast.row", [](Var x) { return diff::broadcast(x, Shape{3, 4}); }, random_array({1, 4}, rng));
  unary("op.broadcast.vector", [](Var x) { return diff::broadcast(x, Shape{2, 3}); }, random_array({3}, rng));
  unary("op.broadcast.scalar", [](Var x) { return diff::broadcast(x, Shape{2, 2}); }, random_array({1}, rng));
  unary("op.reshape", [](Var x) { return diff::reshape(x, Shape{3, 4}); }, random_array({2, 6}, rng));
  unary("op.clip", [](Var x) { return diff::clip(x, -0.5, 0.5); },
        away_from(random_array({4, 3}, rng), {-0.5, 0.5}, 0.01));

  SmallNets small = small_nets(rng);
  {
    std::vector<Array> in = values_of(small.store);
    const std::size_t n = in.size();
    in.push_back(random_array({2, small.encoder.input_dim}, rng));
    in.push_back(random_array({2, small.encoder.hidden_dim}, rng));
    const auto names = small.names;
    const auto enc_cfg = small.encoder;
    check("nets.gru_step",
          weighted(
              [names, enc_cfg, n](Tape&, Leaves v) {
                const auto enc = nets::EncoderVars::from(as_map(names, v.first(n)), enc_cfg);
                return nets::gru_step(enc, v[n], v[n + 1]);
              },
              in, rng),
          in);
  }
  std::vector<rollout::Episode> episodes;
  for (std::size_t len : {4, 4, 3, 5}) episodes.push_back(random_episode(len, 3, 2, rng));
  {
    const std::vector<Array> in = values_of(small.store);
    const auto names = small.names;
    const auto enc_cfg = small.encoder;
    std::vector<const rollout::Episode*> ptrs;
    for (const auto& ep : episodes) ptrs.push_back(&ep);
    check("nets.encode_sum",
          weighted(
              [names, enc_cfg, ptrs](Tape&, Leaves v) {
                return nets::encode_sum(nets::EncoderVars::from(as_map(names, v), enc_cfg), enc_cfg, ptrs);
              },
              in, rng),
          in);
  }
  {
    std::vector<Array> in = values_of(small.store);
    const std::size_t n = in.size();
    in.push_back(random_array({3}, rng));
    const Array states = random_array({4, 3}, rng);
    const Array actions = random_array({4, 2}, rng);
    const auto names = small.names;
    const auto pol_cfg = small.policy;
    check("nets.gaussian_logprob",
          weighted(
              [=](Tape& tape, Leaves v) {
                const auto pol = nets::PolicyVars::from(as_map(names, v.first(n)), pol_cfg);
                const auto head = nets::policy_forward(pol, tape.constant(states), v[n]);
                return nets::gaussian_logprob(head, tape.constant(actions));
              },
              in, rng),
          in);
  }
  {
    std::vector<Array> in = values_of(small.store);
    const std::size_t n = in.size();
    in.push_back(random_array({3}, rng));
    const auto names = small.names;
    const auto pol_cfg = small.policy;
    check("loss.vpg",
          [=](Tape&, Leaves v) {
            return rlopt::vpg_loss(episodes, nets::PolicyVars::from(as_map(names, v.first(n)), pol_cfg), v[n], 0.99);
          },
          in);
    check("loss.ppo",
          [=](Tape&, Leaves v) {
            return rlopt::ppo_loss(episodes, nets::PolicyVars::from(as_map(names, v.first(n)), pol_cfg), v[n], 0.99,
                                   0.2);
          },
          in);
  }

  // The full meta objective through adapt() on a short-horizon task.
  envs::EnvConstants constants;
  constants.horizon = 6;
  const envs::Environment env(envs::EnvId::parse("point_nav"), constants);
  tesp::NetSizes sizes;
  sizes.encoder_hidden = 5;
  sizes.embed_dim = 3;
  sizes.policy_hidden = {6, 5};
  const tesp::AdaptSizes adapt{2, 3, 2};
  tesp::ObjectiveSettings objective;
  objective.eta = 0.05;
  const envs::TaskSpec task{env.id(), {0.4, -0.3}, 7};
  const std::pair<std::string, tesp::LearnerSpec> specs[] = {
      {"meta.tesp", tesp::tesp_spec(env, sizes, adapt, objective)},
      {"meta.tesp_v2", tesp::tesp_spec(env, sizes, adapt, objective, tesp::Variant::v2_fast_update_policy)},
      {"meta.tesp_v5", tesp::tesp_spec(env, sizes, adapt, objective, tesp::Variant::v5_scalar_alpha)},
      {"meta.maml", baselines::maml_spec(env, sizes, adapt, objective, 0.05)},
      {"meta.meta_sgd", baselines::meta_sgd_spec(env, sizes, adapt, objective)},
      {"meta.adapt_sv", baselines::adapt_sv_spec(env, sizes, adapt, objective)},
  };
  for (const auto& [name, spec] : specs) {
    const auto learner = std::make_shared<tesp::Learner>(spec, env);
    Rng init = make_rng(seed, Stream::test, {1});
    nets::ParameterStore meta = learner->initialize(init);
    for (const auto& [pname, value] : meta) {
      if (pname.ends_with("bias") || pname.ends_with("latent")) meta.set(pname, random_array(value.shape(), rng, -0.3, 0.3));
    }
    Rng adapt_rng = make_rng(seed, Stream::test, {2});
    const auto result = std::make_shared<tesp::AdaptResult>(learner->adapt(meta, task, adapt_rng));
    const std::vector<std::string> names = meta.names();
    check(name,
          [learner, result, names](Tape& tape, Leaves v) {
            return learner->meta_loss(tape, as_map(names, v), *result).objective;
          },
          values_of(meta));
  }
  return out;
}

}  // namespace metarl::harness

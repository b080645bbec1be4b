#include "metarl/tesp/learner.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "metarl/diff/ops.hpp"
#include "metarl/rlopt/rlopt.hpp"
#include "metarl/tesp/tesp.hpp"

namespace metarl::tesp {

std::string AlphaRule::meta_name(const std::string& param) const {
  switch (mode) {
    case Mode::per_parameter:
      return std::string(rlopt::kAlphaPrefix) + param;
    case Mode::tied_scalar:
      return kTiedAlphaName;
    case Mode::fixed:
      return {};
  }
  return {};
}

Array AlphaRule::values(const ParameterStore& meta, const std::string& param, const Shape& shape) const {
  switch (mode) {
    case Mode::per_parameter:
      return meta.at(meta_name(param));
    case Mode::tied_scalar:
      return Array(shape, meta.at(kTiedAlphaName).item());
    case Mode::fixed:
      return Array(shape, fixed_value);
  }
  return {};
}

Var AlphaRule::var(Tape& tape, const VarMap& meta_vars, const std::string& param, const Shape& shape) const {
  switch (mode) {
    case Mode::per_parameter:
      return nets::lookup(meta_vars, meta_name(param));
    case Mode::tied_scalar:
      return diff::broadcast(nets::lookup(meta_vars, kTiedAlphaName), shape);
    case Mode::fixed:
      return tape.constant(Array(shape, fixed_value));
  }
  return {};
}

Array sgd_step(const Array& theta, const Array& alpha, const Array& grad) {
  if (theta.shape() != alpha.shape() || theta.shape() != grad.shape()) {
    throw std::invalid_argument("sgd_step: shape mismatch between parameter, rate and gradient");
  }
  Array out = theta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta[i] - alpha[i] * grad[i];
  return out;
}

Var sgd_step(Var theta, Var alpha, const Array& grad) {
  return diff::sub(theta, diff::mul(alpha, theta.tape().constant(grad)));
}

void LearnerSpec::validate() const {
  if (episodes_per_round < 2) throw std::invalid_argument("learner: N must be >= 2");
  if (buffer_capacity < 1) throw std::invalid_argument("learner: M must be >= 1");
  if (fast_prefixes.empty()) throw std::invalid_argument("learner: empty fast-update set");
  if (eta < 0.0) throw std::invalid_argument("learner: eta must be >= 0");
  if (source != EmbeddingSource::none && policy.embed_dim != encoder.embed_dim) {
    throw std::invalid_argument("learner: policy embedding width must equal the encoder's");
  }
}

Var compute_embedding(const nets::EncoderVars& encoder, const nets::EncoderConfig& config,
                      const EpisodeBuffer& buffer) {
  if (buffer.empty()) throw std::invalid_argument("compute_embedding: empty episode buffer (warm up first)");
  const std::vector<const Episode*> eps = buffer.episodes();
  return diff::scale(nets::encode_sum(encoder, config, eps), 1.0 / static_cast<double>(eps.size()));
}

Learner::Learner(LearnerSpec spec, envs::Environment env) : spec_(std::move(spec)), env_(std::move(env)) {
  spec_.validate();
}

ParameterStore Learner::initialize(Rng& rng) const {
  ParameterStore store;
  if (spec_.source == EmbeddingSource::episode_buffer) nets::init_encoder(store, spec_.encoder, rng);
  nets::init_policy(store, spec_.policy, rng);
  if (spec_.source == EmbeddingSource::latent) store.add(kLatentName, Array(Shape{spec_.policy.embed_dim}, 0.0));
  if (spec_.alpha.mode == AlphaRule::Mode::per_parameter) {
    for (const std::string& name : fast_names(store)) {
      store.add(spec_.alpha.meta_name(name), Array(store.at(name).shape(), spec_.alpha_init));
    }
  } else if (spec_.alpha.mode == AlphaRule::Mode::tied_scalar) {
    store.add(kTiedAlphaName, Array(Shape{1}, spec_.alpha_init));
  }
  return store;
}

void Learner::check_compatible(const ParameterStore& meta) const {
  Rng scratch(0);
  const ParameterStore expected = initialize(scratch);
  for (const auto& [name, value] : expected) {
    if (!meta.contains(name)) throw std::invalid_argument("checkpoint is missing parameter '" + name + "'");
    if (meta.at(name).shape() != value.shape()) {
      throw std::invalid_argument("checkpoint parameter '" + name + "' has shape " +
                                  diff::shape_string(meta.at(name).shape()) + ", expected " +
                                  diff::shape_string(value.shape()));
    }
  }
  if (meta.size() != expected.size()) {
    for (const auto& [name, _] : meta) {
      if (!expected.contains(name)) throw std::invalid_argument("checkpoint has unexpected parameter '" + name + "'");
    }
  }
}

bool Learner::is_fast(const std::string& name) const {
  if (name.starts_with(rlopt::kAlphaPrefix)) return false;
  for (const std::string& p : spec_.fast_prefixes) {
    if (name.starts_with(p)) return true;
  }
  return false;
}

std::vector<std::string> Learner::fast_names(const ParameterStore& meta) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : meta) {
    if (is_fast(name)) out.push_back(name);
  }
  return out;
}

Var Learner::embedding(const VarMap& vars, const EpisodeBuffer& buffer) const {
  return compute_embedding(nets::EncoderVars::from(vars, spec_.encoder), spec_.encoder, buffer);
}

AdaptResult Learner::adapt(const ParameterStore& meta, const TaskSpec& task, Rng& rng,
                           const rollout::SampleOptions& options) const {
  const std::vector<std::string> fast = fast_names(meta);
  const std::size_t n = spec_.episodes_per_round;
  ParameterStore working = meta;  // fast entries evolve; the rest stay at the meta values
  const rollout::PolicyHandle policy{&working, &spec_.policy};

  AdaptResult result;
  result.task = task;
  if (spec_.source == EmbeddingSource::episode_buffer) {
    const Array zero(Shape{spec_.encoder.embed_dim}, 0.0);
    WarmUp warm = warm_up(env_, task, policy, n, spec_.buffer_capacity, rng, options);
    result.buffer.emplace(std::move(warm.buffer));
    result.trace.warmup_rounds += 1;
    result.trace.sampling_embeddings.push_back(zero);
    result.trace.episodes_sampled += n;
  }

  for (std::size_t k = 0; k < spec_.fast_updates; ++k) {
    Tape tape;
    const VarMap vars = nets::bind(tape, working, [this](std::string_view name) { return is_fast(std::string(name)); });
    Var h;
    if (spec_.source == EmbeddingSource::episode_buffer) {
      h = embedding(vars, *result.buffer);
    } else if (spec_.source == EmbeddingSource::latent) {
      h = nets::lookup(vars, kLatentName);
    }
    const Array h_value = h.valid() ? h.value() : Array(Shape{0});
    std::vector<Episode> episodes = rollout::sample_episodes(env_, task, policy, h_value, n, rng, options);
    result.trace.sampling_embeddings.push_back(h_value);
    result.trace.episodes_sampled += n;

    Var loss = rlopt::vpg_loss(episodes, nets::PolicyVars::from(vars, spec_.policy), h, spec_.gamma);
    tape.backward(loss);
    ParameterStore grads;
    for (const std::string& name : fast) grads.add(name, nets::lookup(vars, name).grad());
    fast_update(working, grads, meta, spec_.alpha, task.task_id);
    result.fast_grads.push_back(std::move(grads));
    result.trace.fast_update_rounds += 1;
    if (result.buffer) result.buffer->update(episodes);
  }

  {
    Tape tape;
    const VarMap vars = nets::bind_constants(tape, working);
    if (spec_.source == EmbeddingSource::episode_buffer) {
      result.embedding = embedding(vars, *result.buffer).value();
    } else if (spec_.source == EmbeddingSource::latent) {
      result.embedding = working.at(kLatentName);
    } else {
      result.embedding = Array(Shape{0});
    }
  }
  result.final_episodes = rollout::sample_episodes(env_, task, policy, result.embedding, n, rng, options);
  result.trace.final_rounds += 1;
  result.trace.sampling_embeddings.push_back(result.embedding);
  result.trace.episodes_sampled += n;

  for (const std::string& name : fast) result.fast_params.add(name, working.at(name));
  return result;
}

Learner::MetaLoss Learner::meta_loss(Tape& tape, const VarMap& leaves, const AdaptResult& result) const {
  VarMap vars = leaves;
  for (const auto& [name, _] : result.fast_params) {
    Var theta = nets::lookup(leaves, name);
    const Shape shape = theta.shape();
    for (const ParameterStore& g : result.fast_grads) {
      theta = sgd_step(theta, spec_.alpha.var(tape, leaves, name, shape), g.at(name));
    }
    vars[name] = theta;
  }

  Var h;
  if (spec_.source == EmbeddingSource::episode_buffer) {
    h = embedding(vars, *result.buffer);
  } else if (spec_.source == EmbeddingSource::latent) {
    h = nets::lookup(vars, kLatentName);
  }
  Var rl = rlopt::ppo_loss(result.final_episodes, nets::PolicyVars::from(vars, spec_.policy), h, spec_.gamma,
                           spec_.clip_eps);
  const Var losses[] = {rl};
  std::vector<Var> embeddings;
  if (h.valid()) embeddings.push_back(h);
  return {meta_objective(losses, embeddings, spec_.eta), rl};
}

MetaGradient Learner::meta_gradient(const ParameterStore& meta, const AdaptResult& result) const {
  Tape tape;
  const VarMap leaves = nets::bind(tape, meta, [](std::string_view) { return true; });
  const MetaLoss loss = meta_loss(tape, leaves, result);
  tape.backward(loss.objective);

  MetaGradient out;
  out.objective = loss.objective.value().item();
  out.rl_loss = loss.rl_loss.value().item();
  out.penalty = out.objective - out.rl_loss;
  for (const auto& [name, leaf] : leaves) out.grads.add(name, leaf.grad());
  return out;
}

}  // namespace metarl::tesp

#include "metarl/tesp/tesp.hpp"

#include <stdexcept>

#include "metarl/diff/ops.hpp"

namespace metarl::tesp {

Variant parse_variant(const std::string& text) {
  for (Variant v : all_variants()) {
    if (variant_name(v) == text) return v;
  }
  throw std::invalid_argument("unknown variant '" + text +
                              "' (expected none, v1_all_episodes, v2_fast_update_policy, v3_eta_zero, "
                              "v4_alpha_zero or v5_scalar_alpha)");
}

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::none:
      return "none";
    case Variant::v1_all_episodes:
      return "v1_all_episodes";
    case Variant::v2_fast_update_policy:
      return "v2_fast_update_policy";
    case Variant::v3_eta_zero:
      return "v3_eta_zero";
    case Variant::v4_alpha_zero:
      return "v4_alpha_zero";
    case Variant::v5_scalar_alpha:
      return "v5_scalar_alpha";
  }
  return "?";
}

std::vector<Variant> all_variants() {
  return {Variant::none,        Variant::v1_all_episodes, Variant::v2_fast_update_policy,
          Variant::v3_eta_zero, Variant::v4_alpha_zero,   Variant::v5_scalar_alpha};
}

nets::EncoderConfig encoder_config(const envs::Environment& env, const NetSizes& sizes) {
  nets::EncoderConfig c;
  c.input_dim = env.state_dim() + env.action_dim() + 1;
  c.hidden_dim = sizes.encoder_hidden;
  c.embed_dim = sizes.embed_dim;
  return c;
}

nets::PolicyConfig policy_config(const envs::Environment& env, const NetSizes& sizes, bool with_embedding) {
  nets::PolicyConfig c;
  c.state_dim = env.state_dim();
  c.embed_dim = with_embedding ? sizes.embed_dim : 0;
  c.hidden = sizes.policy_hidden;
  c.action_dim = env.action_dim();
  return c;
}

LearnerSpec tesp_spec(const envs::Environment& env, const NetSizes& nets, const AdaptSizes& sizes,
                      const ObjectiveSettings& objective, Variant variant) {
  LearnerSpec s;
  s.name = variant == Variant::none ? "tesp" : "tesp_" + variant_name(variant);
  s.source = EmbeddingSource::episode_buffer;
  s.fast_prefixes = {"encoder."};
  s.alpha.mode = AlphaRule::Mode::per_parameter;
  s.alpha_init = objective.alpha_init;
  s.fast_updates = sizes.fast_updates;
  s.episodes_per_round = sizes.episodes_per_round;
  s.buffer_capacity = sizes.buffer_capacity;
  s.eta = objective.eta;
  s.gamma = objective.gamma;
  s.clip_eps = objective.clip_eps;
  s.encoder = encoder_config(env, nets);
  s.policy = policy_config(env, nets, true);
  switch (variant) {
    case Variant::none:
      break;
    case Variant::v1_all_episodes:
      s.buffer_capacity = EpisodeBuffer::kUnbounded;
      break;
    case Variant::v2_fast_update_policy:
      s.fast_prefixes.push_back("policy.");
      break;
    case Variant::v3_eta_zero:
      s.eta = 0.0;
      break;
    case Variant::v4_alpha_zero:
      s.alpha.mode = AlphaRule::Mode::fixed;
      s.alpha.fixed_value = 0.0;
      break;
    case Variant::v5_scalar_alpha:
      s.alpha.mode = AlphaRule::Mode::tied_scalar;
      break;
  }
  return s;
}

WarmUp warm_up(const envs::Environment& env, const TaskSpec& task, const rollout::PolicyHandle& policy,
               std::size_t episodes, std::size_t capacity, Rng& rng, const rollout::SampleOptions& options) {
  const Array zero(Shape{policy.config->embed_dim}, 0.0);
  WarmUp out{EpisodeBuffer(capacity), rollout::sample_episodes(env, task, policy, zero, episodes, rng, options)};
  out.buffer.update(out.episodes);
  return out;
}

void fast_update(ParameterStore& working, const ParameterStore& grads, const ParameterStore& meta,
                 const AlphaRule& alpha, std::int64_t task_id) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) {
      throw std::domain_error("fast_update: non-finite gradient for '" + name + "' on task " +
                              std::to_string(task_id));
    }
  }
  for (const auto& [name, g] : grads) {
    const Array& theta = working.at(name);
    working.set(name, sgd_step(theta, alpha.values(meta, name, theta.shape()), g));
  }
}

Var meta_objective(std::span<const Var> rl_losses, std::span<const Var> embeddings, double eta) {
  if (rl_losses.empty()) throw std::invalid_argument("meta_objective: no task losses");
  Var total = rl_losses[0];
  for (std::size_t i = 1; i < rl_losses.size(); ++i) total = diff::add(total, rl_losses[i]);
  if (eta > 0.0) {
    for (const Var& h : embeddings) total = diff::add(total, diff::scale(diff::sum(diff::square(h)), eta));
  }
  return total;
}

}  // namespace metarl::tesp

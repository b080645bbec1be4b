#pragma once

#include <span>
#include <string>
#include <vector>

#include "metarl/tesp/learner.hpp"

namespace metarl::tesp {

// Ablations of TESP.
enum class Variant {
  none,
  v1_all_episodes,        // buffer keeps every episode (M = infinity)
  v2_fast_update_policy,  // policy parameters join the fast-update set
  v3_eta_zero,            // no embedding regularizer
  v4_alpha_zero,          // alpha = 0: the task encoder is never adapted
  v5_scalar_alpha,        // a single meta-learned rate shared by all parameters
};

Variant parse_variant(const std::string& text);
std::string variant_name(Variant variant);
std::vector<Variant> all_variants();

struct NetSizes {
  std::size_t encoder_hidden = 64;
  std::size_t embed_dim = 8;
  std::vector<std::size_t> policy_hidden{64, 64};
};

struct AdaptSizes {
  std::size_t fast_updates = 3;  // K
  std::size_t episodes_per_round = 8;  // N
  std::size_t buffer_capacity = 4;  // M
};

struct ObjectiveSettings {
  double eta = 0.01;
  double gamma = 0.99;
  double clip_eps = 0.2;
  double alpha_init = 0.05;
};

nets::EncoderConfig encoder_config(const envs::Environment& env, const NetSizes& sizes);
nets::PolicyConfig policy_config(const envs::Environment& env, const NetSizes& sizes, bool with_embedding);

LearnerSpec tesp_spec(const envs::Environment& env, const NetSizes& nets, const AdaptSizes& sizes,
                      const ObjectiveSettings& objective, Variant variant = Variant::none);

struct WarmUp {
  EpisodeBuffer buffer;
  std::vector<Episode> episodes;
};

// N episodes under the zero embedding; the buffer keeps the best M.
WarmUp warm_up(const envs::Environment& env, const TaskSpec& task, const rollout::PolicyHandle& policy,
               std::size_t episodes, std::size_t capacity, Rng& rng, const rollout::SampleOptions& options = {});

// theta^{k+1} = theta^k - alpha * grad for every entry of `grads`; entries of
// `working` not in `grads` (the shared policy, for TESP) are left untouched.
// Throws naming the task if a gradient is non-finite.
void fast_update(ParameterStore& working, const ParameterStore& grads, const ParameterStore& meta,
                 const AlphaRule& alpha, std::int64_t task_id);

// sum_i rl_loss_i + eta * sum_i |h_i|^2. Embeddings may be empty (no penalty).
Var meta_objective(std::span<const Var> rl_losses, std::span<const Var> embeddings, double eta);

}  // namespace metarl::tesp

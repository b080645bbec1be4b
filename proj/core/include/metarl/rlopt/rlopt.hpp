#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "metarl/nets/nets.hpp"
#include "metarl/rollout/episode.hpp"

namespace metarl::rlopt {

using diff::Var;
using nets::ParameterStore;
using rollout::Episode;

// out[t] = sum_{t' >= t} gamma^(t'-t) r_t'
std::vector<double> reward_to_go(const Episode& episode, double gamma);

// Reward-to-go minus the per-timestep batch mean of reward-to-go, then
// normalized to zero mean / unit std over every timestep of the batch.
// A batch with zero spread yields all-zero advantages. Needs >= 2 episodes.
std::vector<std::vector<double>> normalized_advantages(std::span<const Episode> episodes, double gamma);

// log pi(a_t | s_t, h) for every timestep of every episode, stacked in
// episode-major order -> [sum of lengths].
Var batch_logprob(const nets::PolicyVars& policy, Var embedding, std::span<const Episode> episodes);

// -(1 / sum of lengths) * sum_t log pi(a_t | s_t, h) * A_t
Var vpg_loss(std::span<const Episode> episodes, const nets::PolicyVars& policy, Var embedding, double gamma);

// -mean_t min(rho_t A_t, clip(rho_t, 1 - eps, 1 + eps) A_t),
// rho_t = exp(log pi_new(a_t) - old_logprob_t).
Var ppo_loss(std::span<const Episode> episodes, std::span<const double> old_logprobs,
             const nets::PolicyVars& policy, Var embedding, double gamma, double clip_eps);
// Same, with the log-probabilities recorded at sampling time.
Var ppo_loss(std::span<const Episode> episodes, const nets::PolicyVars& policy, Var embedding, double gamma,
             double clip_eps);

struct AdamSettings {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Entries under this prefix (learned fast-update rates) are clipped to
  // [0, alpha_max] after every step.
  double alpha_max = 0.5;

  friend bool operator==(const AdamSettings&, const AdamSettings&) = default;
};

inline constexpr std::string_view kAlphaPrefix = "meta.alpha.";

struct MetaOptState {
  AdamSettings settings;
  std::uint64_t step = 0;
  ParameterStore first_moment;
  ParameterStore second_moment;

  static MetaOptState zeros_like(const ParameterStore& params, AdamSettings settings);
  friend bool operator==(const MetaOptState&, const MetaOptState&) = default;
};

// One adaptive-moment step with bias correction. `grads` must carry exactly
// the names and shapes of `params`; non-finite gradients throw before any
// parameter is touched.
void meta_step(ParameterStore& params, const ParameterStore& grads, MetaOptState& state);

void write_opt_state(std::ostream& out, const MetaOptState& state);
MetaOptState read_opt_state(std::istream& in);

}  // namespace metarl::rlopt

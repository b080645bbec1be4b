#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "metarl/nets/parameter_store.hpp"
#include "metarl/rollout/episode.hpp"
#include "metarl/util/rng.hpp"

namespace metarl::nets {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// GRU over (state, action, reward) triplets followed by a fully-connected
// layer: the task encoder.
struct EncoderConfig {
  std::size_t input_dim = 7;  // state_dim + action_dim + 1
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 8;
  std::string prefix = "encoder";

  void validate() const;
};

// Gaussian MLP policy over concat(state, embedding). embed_dim == 0 gives an
// observation-only policy (used by MAML / Meta-SGD).
struct PolicyConfig {
  std::size_t state_dim = 4;
  std::size_t embed_dim = 8;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t action_dim = 2;
  std::string prefix = "policy";

  std::size_t input_dim() const { return state_dim + embed_dim; }
  void validate() const;
};

// Weights uniform in +-1/sqrt(fan_in), biases zero, log_std zero.
void init_encoder(ParameterStore& store, const EncoderConfig& config, Rng& rng);
void init_policy(ParameterStore& store, const PolicyConfig& config, Rng& rng);

// Tape views of the parameters. Weight layout is [fan_in, fan_out]; inputs
// are row-batched, so a layer computes x * W + b.
struct EncoderVars {
  Var w_z, u_z, b_z;
  Var w_r, u_r, b_r;
  Var w_h, u_h, b_h;
  Var fc_weight, fc_bias;

  static EncoderVars from(const VarMap& vars, const EncoderConfig& config);
};

struct PolicyVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  Var log_std;

  static PolicyVars from(const VarMap& vars, const PolicyConfig& config);
};

// x: [batch, input_dim], h: [batch, hidden_dim] -> [batch, hidden_dim]
//   z  = sigmoid(x W_z + h U_z + b_z)
//   r  = sigmoid(x W_r + h U_r + b_r)
//   h~ = tanh(x W_h + (r * h) U_h + b_h)
//   h' = (1 - z) * h + z * h~
Var gru_step(const EncoderVars& enc, Var x, Var h);

// Encoder input rows (s_t, a_t, r_t) of one episode: [T, input_dim].
Array encoder_inputs(const rollout::Episode& episode);

// Runs the GRU from h = 0 over the episode triplets and applies the FC layer
// to the final hidden state. Returns [embed_dim]. Throws on empty episodes.
Var encode_episode(const EncoderVars& enc, const EncoderConfig& config, const rollout::Episode& episode);

// Sum over episodes of encode_episode, batching episodes of equal length
// through the recurrence together. Returns [embed_dim].
Var encode_sum(const EncoderVars& enc, const EncoderConfig& config,
               std::span<const rollout::Episode* const> episodes);

struct GaussianHead {
  Var mean;     // [batch, action_dim]
  Var log_std;  // [action_dim], already clipped
  Var std;      // [action_dim]
};

// states: [batch, state_dim]. `embedding` ([embed_dim]) is appended to every
// row; pass an invalid Var for observation-only policies.
GaussianHead policy_forward(const PolicyVars& policy, Var states, Var embedding);

// Per-row Gaussian log-density of `actions` ([batch, action_dim]) -> [batch].
Var gaussian_logprob(const GaussianHead& head, Var actions);

// sum_d -0.5 ((a - mu)/sigma)^2 - log sigma - 0.5 log(2 pi)
double gaussian_logprob(std::span<const double> mean, std::span<const double> std,
                        std::span<const double> action);

}  // namespace metarl::nets

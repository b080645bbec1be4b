#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metarl/envs/envs.hpp"
#include "metarl/nets/nets.hpp"
#include "metarl/rollout/rollout.hpp"

// Shared machinery for every meta-learner in the project: a set of "fast"
// parameters adapted per task with a (learned) per-parameter SGD rule,
// followed by a first-order meta-gradient of the post-adaptation objective.
// TESP, its ablations and the MAML / Meta-SGD / AdaptSV baselines are all
// configurations of Learner.
namespace metarl::tesp {

using diff::Array;
using diff::Shape;
using diff::Tape;
using diff::Var;
using envs::TaskSpec;
using nets::ParameterStore;
using nets::VarMap;
using rollout::Episode;
using rollout::EpisodeBuffer;

inline constexpr const char* kTiedAlphaName = "meta.alpha.scalar";
inline constexpr const char* kLatentName = "adaptsv.latent";

// How the fast-update step size of a parameter array is obtained.
struct AlphaRule {
  enum class Mode {
    per_parameter,  // meta-learned array "meta.alpha.<name>" of the same shape
    tied_scalar,    // one meta-learned scalar shared by every fast parameter
    fixed,          // constant `fixed_value`, not meta-learned
  };
  Mode mode = Mode::per_parameter;
  double fixed_value = 0.0;

  // Name of the meta parameter holding the rate for `param`; empty if fixed.
  std::string meta_name(const std::string& param) const;
  Array values(const ParameterStore& meta, const std::string& param, const Shape& shape) const;
  Var var(Tape& tape, const VarMap& meta_vars, const std::string& param, const Shape& shape) const;
};

// theta - alpha * grad, elementwise.
Array sgd_step(const Array& theta, const Array& alpha, const Array& grad);
Var sgd_step(Var theta, Var alpha, const Array& grad);

enum class EmbeddingSource {
  none,            // observation-only policy (MAML, Meta-SGD)
  episode_buffer,  // TESP: mean task-encoder output over the episode buffer
  latent,          // AdaptSV: a single adapted latent vector
};

struct LearnerSpec {
  std::string name = "tesp";
  EmbeddingSource source = EmbeddingSource::episode_buffer;
  // Prefixes of the parameter arrays updated during fast-update.
  std::vector<std::string> fast_prefixes{"encoder."};
  AlphaRule alpha;
  double alpha_init = 0.05;
  std::size_t fast_updates = 3;  // K
  std::size_t episodes_per_round = 8;  // N
  std::size_t buffer_capacity = 4;  // M; EpisodeBuffer::kUnbounded keeps all
  double eta = 0.01;
  double gamma = 0.99;
  double clip_eps = 0.2;
  nets::EncoderConfig encoder;
  nets::PolicyConfig policy;

  void validate() const;
};

struct AdaptTrace {
  std::size_t warmup_rounds = 0;
  std::size_t fast_update_rounds = 0;
  std::size_t final_rounds = 0;
  // Embedding fed to the policy in each sampling round, in order.
  std::vector<Array> sampling_embeddings;
  std::size_t episodes_sampled = 0;
};

struct AdaptResult {
  TaskSpec task;
  // Adapted values of the fast parameters after K updates.
  ParameterStore fast_params;
  // Gradient used by each fast-update round, keyed like fast_params.
  std::vector<ParameterStore> fast_grads;
  std::optional<EpisodeBuffer> buffer;
  // h^{K+1} (TESP) or z^{K+1} (AdaptSV); empty for policy-adaptation methods.
  Array embedding;
  std::vector<Episode> final_episodes;
  AdaptTrace trace;
};

struct MetaGradient {
  ParameterStore grads;  // same names and shapes as the meta parameters
  double objective = 0.0;
  double rl_loss = 0.0;
  double penalty = 0.0;
};

class Learner {
 public:
  Learner(LearnerSpec spec, envs::Environment env);

  const LearnerSpec& spec() const { return spec_; }
  const envs::Environment& environment() const { return env_; }

  // Fresh meta parameters: network weights plus learned rates (alpha_init).
  ParameterStore initialize(Rng& rng) const;
  // Throws naming the first parameter missing from (or mis-shaped in) `meta`.
  void check_compatible(const ParameterStore& meta) const;
  bool is_fast(const std::string& name) const;
  std::vector<std::string> fast_names(const ParameterStore& meta) const;

  // Warm-up (episode-buffer methods only), K rounds of {embed, sample,
  // fast-update, buffer update}, then the final embedding and episodes.
  AdaptResult adapt(const ParameterStore& meta, const TaskSpec& task, Rng& rng,
                    const rollout::SampleOptions& options = {}) const;

  // First-order gradient of L(final episodes) + eta * |h|^2 w.r.t. the meta
  // parameters. The fast-update chain theta^{k+1} = theta^k - alpha * g_k is
  // rebuilt on the tape with each g_k held constant, so the fast-parameter
  // initialization and the learned rates both receive gradient.
  MetaGradient meta_gradient(const ParameterStore& meta, const AdaptResult& result) const;

  struct MetaLoss {
    Var objective;
    Var rl_loss;
  };
  // The loss behind meta_gradient, built from caller-bound meta leaves.
  MetaLoss meta_loss(Tape& tape, const VarMap& leaves, const AdaptResult& result) const;

  // Embedding of the buffer under the given encoder parameters.
  Var embedding(const VarMap& vars, const EpisodeBuffer& buffer) const;

 private:
  LearnerSpec spec_;
  envs::Environment env_;
};

// mean over buffer episodes of encode_episode; divisor is the buffer size.
Var compute_embedding(const nets::EncoderVars& encoder, const nets::EncoderConfig& config,
                      const EpisodeBuffer& buffer);

}  // namespace metarl::tesp

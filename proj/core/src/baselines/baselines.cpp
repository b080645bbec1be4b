#include "metarl/baselines/baselines.hpp"

#include <stdexcept>

namespace metarl::baselines {

using tesp::AlphaRule;
using tesp::EmbeddingSource;

BaselineKind parse_baseline(const std::string& text) {
  if (text == "maml") return BaselineKind::maml;
  if (text == "meta_sgd") return BaselineKind::meta_sgd;
  if (text == "adapt_sv") return BaselineKind::adapt_sv;
  throw std::invalid_argument("unknown baseline '" + text + "'");
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::maml:
      return "maml";
    case BaselineKind::meta_sgd:
      return "meta_sgd";
    case BaselineKind::adapt_sv:
      return "adapt_sv";
  }
  return "?";
}

namespace {

LearnerSpec common(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                   const tesp::ObjectiveSettings& objective) {
  LearnerSpec s;
  s.fast_updates = sizes.fast_updates;
  s.episodes_per_round = sizes.episodes_per_round;
  s.buffer_capacity = sizes.buffer_capacity;
  s.eta = objective.eta;
  s.gamma = objective.gamma;
  s.clip_eps = objective.clip_eps;
  s.alpha_init = objective.alpha_init;
  s.encoder = tesp::encoder_config(env, nets);
  return s;
}

void require(const tesp::Learner& learner, EmbeddingSource source, const char* what) {
  if (learner.spec().source != source) throw std::invalid_argument(std::string(what) + ": learner is misconfigured");
}

}  // namespace

LearnerSpec maml_spec(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                      const tesp::ObjectiveSettings& objective, double maml_alpha) {
  LearnerSpec s = common(env, nets, sizes, objective);
  s.name = "maml";
  s.source = EmbeddingSource::none;
  s.fast_prefixes = {"policy."};
  s.alpha.mode = AlphaRule::Mode::fixed;
  s.alpha.fixed_value = maml_alpha;
  s.eta = 0.0;
  s.policy = tesp::policy_config(env, nets, false);
  return s;
}

LearnerSpec meta_sgd_spec(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                          const tesp::ObjectiveSettings& objective) {
  LearnerSpec s = common(env, nets, sizes, objective);
  s.name = "meta_sgd";
  s.source = EmbeddingSource::none;
  s.fast_prefixes = {"policy."};
  s.alpha.mode = AlphaRule::Mode::per_parameter;
  s.eta = 0.0;
  s.policy = tesp::policy_config(env, nets, false);
  return s;
}

LearnerSpec adapt_sv_spec(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                          const tesp::ObjectiveSettings& objective) {
  LearnerSpec s = common(env, nets, sizes, objective);
  s.name = "adapt_sv";
  s.source = EmbeddingSource::latent;
  s.fast_prefixes = {tesp::kLatentName};
  s.alpha.mode = AlphaRule::Mode::per_parameter;
  s.policy = tesp::policy_config(env, nets, true);
  return s;
}

tesp::AdaptResult maml_adapt(const tesp::Learner& maml, const nets::ParameterStore& meta,
                             const envs::TaskSpec& task, Rng& rng, const rollout::SampleOptions& options) {
  require(maml, EmbeddingSource::none, "maml_adapt");
  return maml.adapt(meta, task, rng, options);
}

tesp::AdaptResult meta_sgd_adapt(const tesp::Learner& meta_sgd, const nets::ParameterStore& meta,
                                 const envs::TaskSpec& task, Rng& rng, const rollout::SampleOptions& options) {
  require(meta_sgd, EmbeddingSource::none, "meta_sgd_adapt");
  return meta_sgd.adapt(meta, task, rng, options);
}

tesp::AdaptResult adapt_sv(const tesp::Learner& learner, const nets::ParameterStore& meta,
                           const envs::TaskSpec& task, Rng& rng, const rollout::SampleOptions& options) {
  require(learner, EmbeddingSource::latent, "adapt_sv");
  return learner.adapt(meta, task, rng, options);
}

}  // namespace metarl::baselines

#pragma once

#include <string>

#include "metarl/tesp/tesp.hpp"

// MAML, Meta-SGD and AdaptSV expressed as Learner configurations, so they
// share environments, episode counts, K, seeds and the PPO meta-update with
// TESP.
namespace metarl::baselines {

using tesp::LearnerSpec;

enum class BaselineKind { maml, meta_sgd, adapt_sv };

BaselineKind parse_baseline(const std::string& text);
std::string baseline_name(BaselineKind kind);

// Observation-only policy, all policy parameters fast-updated with the
// constant scalar rate `maml_alpha`.
LearnerSpec maml_spec(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                      const tesp::ObjectiveSettings& objective, double maml_alpha);

// As MAML, with a meta-learned rate array per policy parameter (init alpha_init).
LearnerSpec meta_sgd_spec(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                          const tesp::ObjectiveSettings& objective);

// TESP's embedding-conditioned shared policy, but the only fast parameter is
// a meta-learned latent vector fed in place of the task embedding. No
// encoder, no buffer; eta * |z|^2 regularizes the adapted latent.
LearnerSpec adapt_sv_spec(const envs::Environment& env, const tesp::NetSizes& nets, const tesp::AdaptSizes& sizes,
                          const tesp::ObjectiveSettings& objective);

tesp::AdaptResult maml_adapt(const tesp::Learner& maml, const nets::ParameterStore& meta,
                             const envs::TaskSpec& task, Rng& rng, const rollout::SampleOptions& options = {});
tesp::AdaptResult meta_sgd_adapt(const tesp::Learner& meta_sgd, const nets::ParameterStore& meta,
                                 const envs::TaskSpec& task, Rng& rng, const rollout::SampleOptions& options = {});
tesp::AdaptResult adapt_sv(const tesp::Learner& adapt_sv, const nets::ParameterStore& meta,
                           const envs::TaskSpec& task, Rng& rng, const rollout::SampleOptions& options = {});

}  // namespace metarl::baselines

#include "metarl/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "metarl/diff/ops.hpp"

namespace metarl::rollout {

double Episode::distance_return() const {
  double s = 0.0;
  for (const Transition& t : steps) s += t.distance_reward;
  return s;
}

void Episode::finalize() { return_ = episode_return(*this); }

double episode_return(const Episode& episode) {
  double s = 0.0;
  for (const Transition& t : episode.steps) s += t.reward;
  return s;
}

std::vector<Episode> sample_episodes(const envs::Environment& env, const envs::TaskSpec& task,
                                     const PolicyHandle& policy, const Array& embedding, std::size_t count,
                                     Rng& rng, const SampleOptions& options) {
  if (count < 1) throw std::invalid_argument("sample_episodes: count must be >= 1");
  const nets::PolicyConfig& pc = *policy.config;
  if (embedding.size() != pc.embed_dim && !(pc.embed_dim == 0 && embedding.size() <= 1)) {
    throw std::invalid_argument("sample_episodes: embedding has " + std::to_string(embedding.size()) +
                                " values, policy expects " + std::to_string(pc.embed_dim));
  }
  const std::size_t sd = env.state_dim(), ad = env.action_dim();
  if (pc.state_dim != sd || pc.action_dim != ad) {
    throw std::invalid_argument("sample_episodes: policy dimensions do not match the environment");
  }

  std::vector<envs::EnvState> states(count, env.reset(task));
  std::vector<Episode> episodes(count);
  for (Episode& e : episodes) e.steps.reserve(env.horizon());
  std::normal_distribution<double> normal(0.0, 1.0);

  diff::Tape tape;
  nets::VarMap vars;
  for (const auto& [name, value] : *policy.params) {
    if (name.starts_with(pc.prefix + ".")) vars.emplace(name, tape.constant(value));
  }
  const nets::PolicyVars pv = nets::PolicyVars::from(vars, pc);
  diff::Var h;
  if (pc.embed_dim > 0) h = tape.constant(embedding);

  for (std::size_t t = 0; t < env.horizon(); ++t) {
    Array obs(diff::Shape{count, sd});
    std::vector<Array> rows(count);
    for (std::size_t i = 0; i < count; ++i) {
      rows[i] = env.observation(task, states[i]);
      std::copy(rows[i].data().begin(), rows[i].data().end(), obs.data().begin() + i * sd);
    }
    nets::GaussianHead head;
    try {
      head = nets::policy_forward(pv, tape.constant(std::move(obs)), h);
    } catch (const std::domain_error&) {
      throw std::domain_error(fmt::format("sample_episodes: non-finite policy output (policy parameter norm {:.9g})",
                                          policy.params->l2_norm()));
    }
    const Array& mean = head.mean.value();
    const Array& stdv = head.std.value();

    for (std::size_t i = 0; i < count; ++i) {
      Array action(diff::Shape{ad});
      for (std::size_t d = 0; d < ad; ++d) {
        const double mu = mean[i * ad + d];
        action[d] = options.deterministic ? mu : mu + stdv[d] * normal(rng);
      }
      Transition tr;
      tr.logprob = nets::gaussian_logprob(std::span(mean.data().subspan(i * ad, ad)), stdv.data(), action.data());
      envs::StepResult res = env.step(task, states[i], action.data(), t);
      tr.state = std::move(rows[i]);
      tr.action = std::move(action);
      tr.reward = res.reward;
      tr.distance_reward = res.distance_reward;
      episodes[i].steps.push_back(std::move(tr));
      states[i] = std::move(res.next_state);
    }
  }
  for (Episode& e : episodes) e.finalize();
  return episodes;
}

std::vector<Episode> select_top(std::vector<Episode> episodes, std::size_t m) {
  std::stable_sort(episodes.begin(), episodes.end(),
                   [](const Episode& a, const Episode& b) { return a.return_ > b.return_; });
  if (episodes.size() > m) episodes.resize(m);
  return episodes;
}

EpisodeBuffer::EpisodeBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw std::invalid_argument("EpisodeBuffer: capacity must be >= 1");
}

void EpisodeBuffer::update(std::span<const Episode> episodes) {
  for (const Episode& e : episodes) entries_.push_back(Entry{e, next_id_++});
  std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    if (a.episode.return_ != b.episode.return_) return a.episode.return_ > b.episode.return_;
    return a.id < b.id;
  });
  if (entries_.size() > capacity_) entries_.resize(capacity_);
}

std::vector<const Episode*> EpisodeBuffer::episodes() const {
  std::vector<const Episode*> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(&e.episode);
  return out;
}

std::vector<std::uint64_t> EpisodeBuffer::insertion_ids() const {
  std::vector<std::uint64_t> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.id);
  return out;
}

void write_episodes(std::ostream& out, std::int64_t task_id, std::size_t iteration,
                    std::span<const Episode> episodes) {
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (std::size_t t = 0; t < episodes[e].size(); ++t) {
      const Transition& tr = episodes[e].steps[t];
      out << task_id << '\t' << iteration << '\t' << e << '\t' << t;
      for (double v : tr.state.data()) out << fmt::format("\t{:.9g}", v);
      for (double v : tr.action.data()) out << fmt::format("\t{:.9g}", v);
      out << fmt::format("\t{:.9g}\n", tr.reward);
    }
  }
}

}  // namespace metarl::rollout

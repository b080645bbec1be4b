#include "metarl/rlopt/rlopt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "metarl/diff/ops.hpp"
#include "metarl/util/binary_io.hpp"

namespace metarl::rlopt {

using diff::Array;
using diff::Shape;

std::vector<double> reward_to_go(const Episode& episode, double gamma) {
  std::vector<double> out(episode.size());
  double running = 0.0;
  for (std::size_t t = episode.size(); t-- > 0;) {
    running = episode.steps[t].reward + gamma * running;
    out[t] = running;
  }
  return out;
}

std::vector<std::vector<double>> normalized_advantages(std::span<const Episode> episodes, double gamma) {
  if (episodes.size() < 2) {
    throw std::invalid_argument("advantages: need at least 2 episodes for a batch baseline, got " +
                                std::to_string(episodes.size()));
  }
  std::vector<std::vector<double>> adv;
  adv.reserve(episodes.size());
  std::size_t longest = 0;
  for (const Episode& e : episodes) {
    adv.push_back(reward_to_go(e, gamma));
    longest = std::max(longest, e.size());
  }
  std::vector<double> baseline(longest, 0.0);
  std::vector<double> counts(longest, 0.0);
  for (const auto& rtg : adv) {
    for (std::size_t t = 0; t < rtg.size(); ++t) {
      baseline[t] += rtg[t];
      counts[t] += 1.0;
    }
  }
  for (std::size_t t = 0; t < longest; ++t) baseline[t] /= counts[t];

  double total = 0.0, n = 0.0;
  for (auto& a : adv) {
    for (std::size_t t = 0; t < a.size(); ++t) {
      a[t] -= baseline[t];
      total += a[t];
      n += 1.0;
    }
  }
  const double mu = total / n;
  double var = 0.0;
  for (const auto& a : adv)
    for (double v : a) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / n);
  for (auto& a : adv) {
    for (double& v : a) v = sd > 1e-12 ? (v - mu) / sd : 0.0;
  }
  return adv;
}

Var batch_logprob(const nets::PolicyVars& policy, Var embedding, std::span<const Episode> episodes) {
  diff::Tape& tape = policy.log_std.tape();
  std::size_t rows = 0;
  for (const Episode& e : episodes) rows += e.size();
  if (rows == 0) throw std::invalid_argument("batch_logprob: no timesteps");
  const std::size_t sd = episodes[0].steps[0].state.size();
  const std::size_t ad = episodes[0].steps[0].action.size();
  Array states(Shape{rows, sd});
  Array actions(Shape{rows, ad});
  std::size_t r = 0;
  for (const Episode& e : episodes) {
    for (const auto& tr : e.steps) {
      std::copy(tr.state.data().begin(), tr.state.data().end(), states.data().begin() + r * sd);
      std::copy(tr.action.data().begin(), tr.action.data().end(), actions.data().begin() + r * ad);
      ++r;
    }
  }
  nets::GaussianHead head = nets::policy_forward(policy, tape.constant(std::move(states)), embedding);
  return nets::gaussian_logprob(head, tape.constant(std::move(actions)));
}

namespace {

Array flatten(const std::vector<std::vector<double>>& nested) {
  std::vector<double> flat;
  for (const auto& v : nested) flat.insert(flat.end(), v.begin(), v.end());
  return Array::vector(std::move(flat));
}

}  // namespace

Var vpg_loss(std::span<const Episode> episodes, const nets::PolicyVars& policy, Var embedding, double gamma) {
  const Array adv = flatten(normalized_advantages(episodes, gamma));
  Var lp = batch_logprob(policy, embedding, episodes);
  diff::Tape& tape = lp.tape();
  const double n = static_cast<double>(adv.size());
  return diff::scale(diff::sum(diff::mul(lp, tape.constant(adv))), -1.0 / n);
}

Var ppo_loss(std::span<const Episode> episodes, std::span<const double> old_logprobs,
             const nets::PolicyVars& policy, Var embedding, double gamma, double clip_eps) {
  if (!(clip_eps > 0.0)) throw std::invalid_argument("ppo_loss: clip_eps must be positive");
  const Array adv = flatten(normalized_advantages(episodes, gamma));
  if (old_logprobs.size() != adv.size()) {
    throw std::invalid_argument("ppo_loss: " + std::to_string(old_logprobs.size()) + " old log-probabilities for " +
                                std::to_string(adv.size()) + " timesteps");
  }
  Var lp = batch_logprob(policy, embedding, episodes);
  diff::Tape& tape = lp.tape();
  Var old = tape.constant(Array::vector(std::vector<double>(old_logprobs.begin(), old_logprobs.end())));
  Var ratio = diff::exp(diff::sub(lp, old));
  Var a = tape.constant(adv);
  Var unclipped = diff::mul(ratio, a);
  Var clipped = diff::mul(diff::clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), a);
  return diff::neg(diff::mean(diff::minimum(unclipped, clipped)));
}

Var ppo_loss(std::span<const Episode> episodes, const nets::PolicyVars& policy, Var embedding, double gamma,
             double clip_eps) {
  std::vector<double> old;
  for (const Episode& e : episodes)
    for (const auto& tr : e.steps) old.push_back(tr.logprob);
  return ppo_loss(episodes, old, policy, embedding, gamma, clip_eps);
}

MetaOptState MetaOptState::zeros_like(const ParameterStore& params, AdamSettings settings) {
  MetaOptState s;
  s.settings = settings;
  for (const auto& [name, value] : params) {
    s.first_moment.add(name, Array(value.shape(), 0.0));
    s.second_moment.add(name, Array(value.shape(), 0.0));
  }
  return s;
}

void meta_step(ParameterStore& params, const ParameterStore& grads, MetaOptState& state) {
  if (grads.size() != params.size()) throw std::invalid_argument("meta_step: gradient set does not match parameters");
  for (const auto& [name, g] : grads) {
    if (!params.contains(name) || params.at(name).shape() != g.shape()) {
      throw std::invalid_argument("meta_step: gradient '" + name + "' does not match any parameter");
    }
    if (!g.all_finite()) throw std::domain_error("meta_step: non-finite gradient for '" + name + "'");
  }
  const AdamSettings& cfg = state.settings;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    Array& p = params.mutable_at(name);
    Array& m = state.first_moment.mutable_at(name);
    Array& v = state.second_moment.mutable_at(name);
    const bool is_alpha = std::string_view(name).starts_with(kAlphaPrefix);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      if (is_alpha) p[i] = std::clamp(p[i], 0.0, cfg.alpha_max);
    }
  }
}

void write_opt_state(std::ostream& out, const MetaOptState& state) {
  io::write_f64(out, state.settings.lr);
  io::write_f64(out, state.settings.beta1);
  io::write_f64(out, state.settings.beta2);
  io::write_f64(out, state.settings.eps);
  io::write_f64(out, state.settings.alpha_max);
  io::write_u64(out, state.step);
  nets::write_parameters(out, state.first_moment);
  nets::write_parameters(out, state.second_moment);
}

MetaOptState read_opt_state(std::istream& in) {
  MetaOptState s;
  s.settings.lr = io::read_f64(in);
  s.settings.beta1 = io::read_f64(in);
  s.settings.beta2 = io::read_f64(in);
  s.settings.eps = io::read_f64(in);
  s.settings.alpha_max = io::read_f64(in);
  s.step = io::read_u64(in);
  s.first_moment = nets::read_parameters(in);
  s.second_moment = nets::read_parameters(in);
  return s;
}

}  // namespace metarl::rlopt

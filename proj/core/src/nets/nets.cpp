#include "metarl/nets/nets.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include "metarl/diff/ops.hpp"

namespace metarl::nets {
namespace {

Array uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Array w(Shape{fan_in, fan_out});
  for (double& v : w.data()) v = dist(rng);
  return w;
}

Var dense(Var x, Var weight, Var bias) {
  Var xw = diff::matmul(x, weight);
  return diff::add(xw, diff::broadcast(bias, xw.shape()));
}

Var affine3(Var x, Var w, Var h, Var u, Var b) {
  Var pre = diff::add(diff::matmul(x, w), diff::matmul(h, u));
  return diff::add(pre, diff::broadcast(b, pre.shape()));
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || embed_dim < 1) {
    throw std::invalid_argument("EncoderConfig: all dimensions must be >= 1");
  }
}

void PolicyConfig::validate() const {
  if (input_dim() < 1 || action_dim < 1) throw std::invalid_argument("PolicyConfig: dimensions must be >= 1");
  for (std::size_t h : hidden) {
    if (h < 1) throw std::invalid_argument("PolicyConfig: hidden layer sizes must be >= 1");
  }
}

void init_encoder(ParameterStore& store, const EncoderConfig& c, Rng& rng) {
  c.validate();
  const std::string gru = c.prefix + ".gru.";
  for (const char* gate : {"z", "r", "h"}) {
    store.add(gru + "w_" + gate, uniform_weight(c.input_dim, c.hidden_dim, rng));
    store.add(gru + "u_" + gate, uniform_weight(c.hidden_dim, c.hidden_dim, rng));
    store.add(gru + "b_" + gate, Array(Shape{c.hidden_dim}, 0.0));
  }
  store.add(c.prefix + ".fc.weight", uniform_weight(c.hidden_dim, c.embed_dim, rng));
  store.add(c.prefix + ".fc.bias", Array(Shape{c.embed_dim}, 0.0));
}

void init_policy(ParameterStore& store, const PolicyConfig& c, Rng& rng) {
  c.validate();
  std::size_t fan_in = c.input_dim();
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    const std::string layer = c.prefix + ".layer" + std::to_string(i);
    store.add(layer + ".weight", uniform_weight(fan_in, c.hidden[i], rng));
    store.add(layer + ".bias", Array(Shape{c.hidden[i]}, 0.0));
    fan_in = c.hidden[i];
  }
  store.add(c.prefix + ".out.weight", uniform_weight(fan_in, c.action_dim, rng));
  store.add(c.prefix + ".out.bias", Array(Shape{c.action_dim}, 0.0));
  store.add(c.prefix + ".log_std", Array(Shape{c.action_dim}, 0.0));
}

EncoderVars EncoderVars::from(const VarMap& vars, const EncoderConfig& c) {
  const std::string gru = c.prefix + ".gru.";
  EncoderVars e;
  e.w_z = lookup(vars, gru + "w_z");
  e.u_z = lookup(vars, gru + "u_z");
  e.b_z = lookup(vars, gru + "b_z");
  e.w_r = lookup(vars, gru + "w_r");
  e.u_r = lookup(vars, gru + "u_r");
  e.b_r = lookup(vars, gru + "b_r");
  e.w_h = lookup(vars, gru + "w_h");
  e.u_h = lookup(vars, gru + "u_h");
  e.b_h = lookup(vars, gru + "b_h");
  e.fc_weight = lookup(vars, c.prefix + ".fc.weight");
  e.fc_bias = lookup(vars, c.prefix + ".fc.bias");
  return e;
}

PolicyVars PolicyVars::from(const VarMap& vars, const PolicyConfig& c) {
  PolicyVars p;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    const std::string layer = c.prefix + ".layer" + std::to_string(i);
    p.weights.push_back(lookup(vars, layer + ".weight"));
    p.biases.push_back(lookup(vars, layer + ".bias"));
  }
  p.weights.push_back(lookup(vars, c.prefix + ".out.weight"));
  p.biases.push_back(lookup(vars, c.prefix + ".out.bias"));
  p.log_std = lookup(vars, c.prefix + ".log_std");
  return p;
}

Var gru_step(const EncoderVars& enc, Var x, Var h) {
  if (x.shape().size() != 2 || h.shape().size() != 2 || x.shape()[0] != h.shape()[0]) {
    throw std::invalid_argument("gru_step: shape mismatch " + diff::shape_string(x.shape()) + " vs " +
                                diff::shape_string(h.shape()));
  }
  Tape& tape = x.tape();
  Var z = diff::sigmoid(affine3(x, enc.w_z, h, enc.u_z, enc.b_z));
  Var r = diff::sigmoid(affine3(x, enc.w_r, h, enc.u_r, enc.b_r));
  Var candidate = diff::tanh(affine3(x, enc.w_h, diff::mul(r, h), enc.u_h, enc.b_h));
  Var one_minus_z = diff::sub(tape.constant(Array(z.shape(), 1.0)), z);
  return diff::add(diff::mul(one_minus_z, h), diff::mul(z, candidate));
}

Array encoder_inputs(const rollout::Episode& episode) {
  if (episode.steps.empty()) throw std::invalid_argument("encoder_inputs: empty episode");
  const std::size_t sd = episode.steps[0].state.size();
  const std::size_t ad = episode.steps[0].action.size();
  const std::size_t width = sd + ad + 1;
  Array out(Shape{episode.size(), width});
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const auto& step = episode.steps[t];
    double* row = out.data().data() + t * width;
    for (std::size_t i = 0; i < sd; ++i) row[i] = step.state[i];
    for (std::size_t i = 0; i < ad; ++i) row[sd + i] = step.action[i];
    row[sd + ad] = step.reward;
  }
  return out;
}

Var encode_sum(const EncoderVars& enc, const EncoderConfig& config,
               std::span<const rollout::Episode* const> episodes) {
  if (episodes.empty()) throw std::invalid_argument("encode_sum: no episodes");
  Tape& tape = enc.w_z.tape();
  std::map<std::size_t, std::vector<Array>> groups;
  for (const rollout::Episode* e : episodes) {
    if (e->steps.empty()) throw std::invalid_argument("encode_episode: empty episode");
    Array inputs = encoder_inputs(*e);
    if (inputs.cols() != config.input_dim) {
      throw std::invalid_argument("encode_episode: triplet width " + std::to_string(inputs.cols()) +
                                  " does not match encoder input_dim " + std::to_string(config.input_dim));
    }
    groups[e->size()].push_back(std::move(inputs));
  }

  Var total;
  for (const auto& [length, members] : groups) {
    const std::size_t batch = members.size();
    const std::size_t width = config.input_dim;
    Var h = tape.constant(Array(Shape{batch, config.hidden_dim}, 0.0));
    for (std::size_t t = 0; t < length; ++t) {
      Array x(Shape{batch, width});
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < width; ++i) x[b * width + i] = members[b][t * width + i];
      h = gru_step(enc, tape.constant(std::move(x)), h);
    }
    Var out = dense(h, enc.fc_weight, enc.fc_bias);
    Var summed = diff::reshape(diff::matmul(tape.constant(Array(Shape{1, batch}, 1.0)), out),
                               Shape{config.embed_dim});
    total = total.valid() ? diff::add(total, summed) : summed;
  }
  return total;
}

Var encode_episode(const EncoderVars& enc, const EncoderConfig& config, const rollout::Episode& episode) {
  const rollout::Episode* one[] = {&episode};
  return encode_sum(enc, config, one);
}

GaussianHead policy_forward(const PolicyVars& policy, Var states, Var embedding) {
  if (states.shape().size() != 2) {
    throw std::invalid_argument("policy_forward: states must be [batch, state_dim], got " +
                                diff::shape_string(states.shape()));
  }
  const std::size_t batch = states.shape()[0];
  Var x = states;
  if (embedding.valid()) {
    const std::size_t d = embedding.value().size();
    Var rows = diff::broadcast(diff::reshape(embedding, Shape{1, d}), Shape{batch, d});
    x = diff::concat(states, rows);
  }
  const std::size_t layers = policy.weights.size();
  for (std::size_t i = 0; i + 1 < layers; ++i) x = diff::tanh(dense(x, policy.weights[i], policy.biases[i]));
  GaussianHead head;
  head.mean = dense(x, policy.weights.back(), policy.biases.back());
  head.log_std = diff::clip(policy.log_std, kLogStdMin, kLogStdMax);
  head.std = diff::exp(head.log_std);
  return head;
}

Var gaussian_logprob(const GaussianHead& head, Var actions) {
  Tape& tape = actions.tape();
  const Shape& shape = head.mean.shape();
  if (actions.shape() != shape) {
    throw std::invalid_argument("gaussian_logprob: action shape " + diff::shape_string(actions.shape()) +
                                " vs mean shape " + diff::shape_string(shape));
  }
  const std::size_t batch = shape[0], dims = shape[1];
  Var inv_std = diff::broadcast(diff::exp(diff::neg(head.log_std)), shape);
  Var z = diff::mul(diff::sub(actions, head.mean), inv_std);
  Var sq_rows = diff::reshape(diff::matmul(diff::square(z), tape.constant(Array(Shape{dims, 1}, 1.0))),
                              Shape{batch});
  const double log_norm = 0.5 * static_cast<double>(dims) * std::log(2.0 * std::numbers::pi);
  Var norm = diff::add(diff::sum(head.log_std), tape.constant(Array::scalar(log_norm)));
  return diff::sub(diff::scale(sq_rows, -0.5), diff::broadcast(norm, Shape{batch}));
}

double gaussian_logprob(std::span<const double> mean, std::span<const double> std,
                        std::span<const double> action) {
  if (mean.size() != std.size() || mean.size() != action.size()) {
    throw std::invalid_argument("gaussian_logprob: dimension mismatch");
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(std[i] > 0.0)) throw std::invalid_argument("gaussian_logprob: std must be positive");
    const double z = (action[i] - mean[i]) / std[i];
    lp += -0.5 * z * z - std::log(std[i]) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

}  // namespace metarl::nets

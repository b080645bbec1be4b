#include <doctest.h>

#include <cmath>
#include <sstream>

#include "metarl/diff/ops.hpp"
#include "metarl/rlopt/rlopt.hpp"
#include "metarl/rollout/rollout.hpp"
#include "oracles.hpp"

using namespace metarl;
using namespace metarl::rlopt;
using diff::Array;

namespace {

Episode from_rewards(std::initializer_list<double> rewards) {
  Episode e;
  for (double r : rewards) {
    rollout::Transition t;
    t.state = Array::vector({0.0, 0.0, 0.0, 0.0});
    t.action = Array::vector({0.0, 0.0});
    t.reward = r;
    e.steps.push_back(t);
  }
  e.finalize();
  return e;
}

struct Small {
  envs::Environment env{envs::EnvId::parse("point_nav"), [] {
                          envs::EnvConstants c;
                          c.horizon = 5;
                          return c;
                        }()};
  nets::PolicyConfig config{4, 2, {5}, 2, "policy"};
  nets::ParameterStore params;
  Array h = Array::vector({0.3, -0.2});
  std::vector<Episode> episodes;

  Small() {
    Rng rng(5);
    nets::init_policy(params, config, rng);
    params.set("policy.log_std", Array::vector({-0.3, 0.2}));
    const envs::TaskSpec task{env.id(), {0.5, 0.2}, 0};
    episodes = rollout::sample_episodes(env, task, {&params, &config}, h, 4, rng);
  }

  // Loss value with the policy parameters and embedding taken from a flat vector.
  double loss_at(const std::vector<double>& flat, const std::function<Var(const nets::PolicyVars&, Var)>& loss) const {
    nets::ParameterStore p = params;
    std::size_t k = 0;
    for (const std::string& n : p.names()) {
      Array& a = p.mutable_at(n);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = flat[k++];
    }
    diff::Tape t;
    const auto pv = nets::PolicyVars::from(nets::bind_constants(t, p), config);
    return loss(pv, t.constant(Array::vector({flat[k], flat[k + 1]}))).value().item();
  }

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& [n, a] : params) out.insert(out.end(), a.data().begin(), a.data().end());
    out.push_back(h[0]);
    out.push_back(h[1]);
    return out;
  }

  std::vector<double> tape_grad(const std::function<Var(const nets::PolicyVars&, Var)>& loss) const {
    diff::Tape t;
    const auto vars = nets::bind(t, params, [](std::string_view) { return true; });
    Var hv = t.parameter(h);
    t.backward(loss(nets::PolicyVars::from(vars, config), hv));
    std::vector<double> out;
    for (const auto& [n, v] : vars) {
      const Array g = v.grad();
      out.insert(out.end(), g.data().begin(), g.data().end());
    }
    out.push_back(hv.grad()[0]);
    out.push_back(hv.grad()[1]);
    return out;
  }
};

}  // namespace

TEST_CASE("reward-to-go") {
  CHECK(reward_to_go(from_rewards({1, 1, 1}), 1.0) == std::vector<double>{3, 2, 1});
  const auto r = reward_to_go(from_rewards({1, 2}), 0.99);
  CHECK(r[0] == doctest::Approx(2.98));
  CHECK(r[1] == 2.0);
  CHECK(reward_to_go(from_rewards({4, -3, 0.5}), 0.7).back() == 0.5);
}

TEST_CASE("normalized advantages against a hand computation") {
  // rtg: e0 = [3, 1], e1 = [2, 2]; per-step means [2.5, 1.5]; centred
  // e0 = [0.5, -0.5], e1 = [-0.5, 0.5]; global std 0.5.
  std::vector<Episode> eps{from_rewards({2, 1}), from_rewards({0, 2})};
  const auto a = normalized_advantages(eps, 1.0);
  CHECK(a[0][0] == doctest::Approx(1.0));
  CHECK(a[0][1] == doctest::Approx(-1.0));
  CHECK(a[1][0] == doctest::Approx(-1.0));
  CHECK(a[1][1] == doctest::Approx(1.0));

  std::vector<Episode> same{from_rewards({1, 2}), from_rewards({1, 2})};
  for (const auto& row : normalized_advantages(same, 0.99))
    for (double v : row) CHECK(v == 0.0);
  CHECK_THROWS_AS(normalized_advantages(std::vector<Episode>{from_rewards({1})}, 1.0), std::invalid_argument);
}

TEST_CASE("raising one reward strictly raises its advantage weight") {
  // e0 = [a, 0], e1 = [0, 1] with gamma = 1: the first-step advantage of e0
  // is sqrt(2) d / sqrt(d^2 + 1), d = a - 1.
  auto weight = [](double a) {
    std::vector<Episode> eps{from_rewards({a, 0}), from_rewards({0, 1})};
    return normalized_advantages(eps, 1.0)[0][0];
  };
  for (double a : {1.5, 2.0, 3.0}) {
    const double d = a - 1.0;
    CHECK(weight(a) == doctest::Approx(std::sqrt(2.0) * d / std::sqrt(d * d + 1.0)));
  }
  CHECK(weight(1.5) < weight(2.0));
  CHECK(weight(2.0) < weight(3.0));
}

TEST_CASE("vanilla policy gradient: zero advantages give zero loss and gradient") {
  Small s;
  std::vector<Episode> same{s.episodes[0], s.episodes[0]};
  diff::Tape t;
  const auto vars = nets::bind(t, s.params, [](std::string_view) { return true; });
  Var hv = t.parameter(s.h);
  Var loss = vpg_loss(same, nets::PolicyVars::from(vars, s.config), hv, 0.99);
  CHECK(loss.value().item() == 0.0);
  t.backward(loss);
  for (const auto& [n, v] : vars) CHECK(v.grad().l2_norm() == 0.0);
  CHECK(hv.grad().l2_norm() == 0.0);
}

TEST_CASE("vanilla policy gradient matches finite differences") {
  Small s;
  auto loss = [&](const nets::PolicyVars& p, Var h) { return vpg_loss(s.episodes, p, h, 0.99); };
  const auto analytic = s.tape_grad(loss);
  const auto numeric = oracle::numeric_gradient([&](const std::vector<double>& x) { return s.loss_at(x, loss); },
                                                s.flat(), 1e-5);
  REQUIRE(analytic.size() == numeric.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) worst = std::max(worst, oracle::rel_err(analytic[i], numeric[i]));
  CHECK(worst < 1e-4);
}

TEST_CASE("PPO matches finite differences and equals the policy gradient at ratio one") {
  Small s;
  auto ppo = [&](const nets::PolicyVars& p, Var h) { return ppo_loss(s.episodes, p, h, 0.99, 0.2); };
  auto vpg = [&](const nets::PolicyVars& p, Var h) { return vpg_loss(s.episodes, p, h, 0.99); };

  diff::Tape t;
  const auto pv = nets::PolicyVars::from(nets::bind_constants(t, s.params), s.config);
  // Ratio one everywhere: -mean(A), which is zero for normalized advantages.
  CHECK(ppo(pv, t.constant(s.h)).value().item() == doctest::Approx(0.0).epsilon(1e-12));

  const auto a = s.tape_grad(ppo);
  const auto b = s.tape_grad(vpg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));

  const auto numeric = oracle::numeric_gradient([&](const std::vector<double>& x) { return s.loss_at(x, ppo); },
                                                s.flat(), 1e-5);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) worst = std::max(worst, oracle::rel_err(a[i], numeric[i]));
  CHECK(worst < 1e-4);
}

TEST_CASE("PPO clipping bounds the objective and stops the gradient where it binds") {
  // Two one-step episodes: advantages +1 (e0) and -1 (e1).
  Small s;
  std::vector<Episode> eps{s.episodes[0], s.episodes[1]};
  for (auto& e : eps) e.steps.resize(1);
  eps[0].steps[0].reward = 1.0;
  eps[1].steps[0].reward = -1.0;

  diff::Tape t0;
  const auto lp = batch_logprob(nets::PolicyVars::from(nets::bind_constants(t0, s.params), s.config),
                                t0.constant(s.h), eps).value();
  // rho_0 = 1.5 (clipped to 1.2 since A > 0), rho_1 = 1.
  const std::vector<double> old{lp[0] - std::log(1.5), lp[1]};

  diff::Tape t;
  const auto vars = nets::bind(t, s.params, [](std::string_view) { return true; });
  const auto pv = nets::PolicyVars::from(vars, s.config);
  Var hv = t.parameter(s.h);
  Var loss = ppo_loss(eps, old, pv, hv, 0.99, 0.2);
  CHECK(loss.value().item() == doctest::Approx(-(1.2 - 1.0) / 2.0));
  t.backward(loss);
  const Array gh = hv.grad();

  // Only e1 contributes: d/dh of 0.5 * log pi(a_1).
  diff::Tape r;
  Var hr = r.parameter(s.h);
  std::vector<Episode> only{eps[1]};
  Var lp1 = batch_logprob(nets::PolicyVars::from(nets::bind_constants(r, s.params), s.config), hr, only);
  r.backward(diff::scale(diff::sum(lp1), 0.5));
  for (std::size_t i = 0; i < 2; ++i) CHECK(gh[i] == doctest::Approx(hr.grad()[i]).epsilon(1e-12));

  CHECK_THROWS_AS(ppo_loss(eps, std::vector<double>{0.0}, pv, hv, 0.99, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(ppo_loss(eps, old, pv, hv, 0.99, 0.0), std::invalid_argument);
}

TEST_CASE("meta step: zero gradient, closed-form first and second steps") {
  nets::ParameterStore p;
  p.add("w", Array::vector({1.0, -2.0, 0.5}));
  MetaOptState st = MetaOptState::zeros_like(p, AdamSettings{});
  nets::ParameterStore zero;
  zero.add("w", Array::vector({0.0, 0.0, 0.0}));
  meta_step(p, zero, st);
  CHECK(p.at("w") == Array::vector({1.0, -2.0, 0.5}));
  CHECK(st.step == 1);

  nets::ParameterStore q;
  q.add("w", Array::vector({1.0, -2.0, 0.5}));
  MetaOptState s = MetaOptState::zeros_like(q, AdamSettings{});
  const AdamSettings& c = s.settings;
  const std::vector<double> g1{0.3, -4.0, 1e-3}, g2{-0.1, 2.0, 0.0};
  nets::ParameterStore grad;
  grad.add("w", Array::vector(g1));
  meta_step(q, grad, s);
  const std::vector<double> start{1.0, -2.0, 0.5};
  std::vector<double> expect(3);
  for (int i = 0; i < 3; ++i) expect[i] = start[i] - c.lr * g1[i] / (std::abs(g1[i]) + c.eps);
  for (int i = 0; i < 3; ++i) CHECK(q.at("w")[i] == doctest::Approx(expect[i]).epsilon(1e-14));

  grad.set("w", Array::vector(g2));
  meta_step(q, grad, s);
  for (int i = 0; i < 3; ++i) {
    const double m = (0.1 * 0.9 * g1[i] + 0.1 * g2[i]) / (1 - 0.81);
    const double v = (0.001 * 0.999 * g1[i] * g1[i] + 0.001 * g2[i] * g2[i]) / (1 - 0.999 * 0.999);
    expect[i] -= c.lr * m / (std::sqrt(v) + c.eps);
    CHECK(q.at("w")[i] == doctest::Approx(expect[i]).epsilon(1e-13));
  }
}

TEST_CASE("meta step clips learned rates into [0, alpha_max]") {
  nets::ParameterStore p;
  p.add("meta.alpha.w", Array::vector({1e-5, 0.4999}));
  p.add("w", Array::vector({1e-5}));
  MetaOptState s = MetaOptState::zeros_like(p, AdamSettings{.lr = 0.01});
  nets::ParameterStore g;
  g.add("meta.alpha.w", Array::vector({1.0, -1.0}));
  g.add("w", Array::vector({1.0}));
  meta_step(p, g, s);
  CHECK(p.at("meta.alpha.w") == Array::vector({0.0, 0.5}));
  CHECK(p.at("w")[0] < 0.0);
}

TEST_CASE("meta step rejects bad gradients without touching parameters") {
  nets::ParameterStore p;
  p.add("a", Array::vector({1.0}));
  p.add("b", Array::vector({2.0}));
  MetaOptState s = MetaOptState::zeros_like(p, AdamSettings{});
  nets::ParameterStore g;
  g.add("a", Array::vector({1.0}));
  g.add("b", Array::vector({NAN}));
  const nets::ParameterStore before = p;
  CHECK_THROWS_AS(meta_step(p, g, s), std::domain_error);
  CHECK(p == before);
  CHECK(s.step == 0);
  nets::ParameterStore wrong;
  wrong.add("a", Array::vector({1.0}));
  CHECK_THROWS_AS(meta_step(p, wrong, s), std::invalid_argument);
}

TEST_CASE("optimizer state round-trips") {
  nets::ParameterStore p;
  p.add("x", Array::matrix(2, 2, {1, 2, 3, 4}));
  MetaOptState s = MetaOptState::zeros_like(p, AdamSettings{.lr = 1e-3, .alpha_max = 0.3});
  nets::ParameterStore g;
  g.add("x", Array::matrix(2, 2, {0.1, -0.2, 0.3, 1.0 / 3.0}));
  meta_step(p, g, s);
  std::stringstream buf;
  write_opt_state(buf, s);
  CHECK(read_opt_state(buf) == s);
}

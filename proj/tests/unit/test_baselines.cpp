#include <doctest.h>

#include "metarl/baselines/baselines.hpp"
#include "metarl/diff/ops.hpp"

using namespace metarl;
using namespace metarl::baselines;
using diff::Array;
using diff::Shape;

namespace {

envs::Environment tiny_env() {
  envs::EnvConstants c;
  c.horizon = 6;
  return envs::Environment(envs::EnvId::parse("point_nav"), c);
}

const tesp::NetSizes kNets{5, 3, {6}};
const tesp::AdaptSizes kSizes{2, 4, 2};
const envs::TaskSpec kTask{envs::EnvId::parse("point_nav"), {0.4, -0.5}, 3};

tesp::Learner maml(double alpha) {
  return tesp::Learner(maml_spec(tiny_env(), kNets, kSizes, tesp::ObjectiveSettings{}, alpha), tiny_env());
}

tesp::Learner meta_sgd(double alpha_init = 0.05) {
  tesp::ObjectiveSettings o;
  o.alpha_init = alpha_init;
  return tesp::Learner(meta_sgd_spec(tiny_env(), kNets, kSizes, o), tiny_env());
}

tesp::Learner latent(std::size_t k = 2) {
  tesp::AdaptSizes s = kSizes;
  s.fast_updates = k;
  return tesp::Learner(adapt_sv_spec(tiny_env(), kNets, s, tesp::ObjectiveSettings{}), tiny_env());
}

}  // namespace

TEST_CASE("baseline names") {
  for (auto k : {BaselineKind::maml, BaselineKind::meta_sgd, BaselineKind::adapt_sv})
    CHECK(parse_baseline(baseline_name(k)) == k);
  CHECK_THROWS(parse_baseline("reptile"));
}

TEST_CASE("MAML: observation-only policy, all of it adapted") {
  const auto l = maml(0.05);
  CHECK(l.spec().policy.embed_dim == 0);
  CHECK(l.spec().eta == 0.0);
  Rng init(1);
  const auto p = l.initialize(init);
  CHECK(p.names_with_prefix("encoder.").empty());
  CHECK(p.names_with_prefix("meta.").empty());
  CHECK(l.fast_names(p) == p.names());
}

TEST_CASE("MAML: the first inner step starts from the meta parameters") {
  Rng init(2);
  const auto l = maml(0.0);
  const auto p = l.initialize(init);
  Rng rng(4);
  const auto r = maml_adapt(l, p, kTask, rng);
  // alpha = 0: adapted parameters equal the initialization bit-exactly.
  for (const auto& [n, v] : r.fast_params) CHECK(v == p.at(n));
  CHECK(r.embedding.size() == 0);
}

TEST_CASE("MAML: a nonzero step moves every adapted array") {
  Rng init(2);
  const auto l = maml(0.1);
  const auto p = l.initialize(init);
  Rng rng(4);
  const auto r = maml_adapt(l, p, kTask, rng);
  for (const auto& [n, v] : r.fast_params) CHECK(v != p.at(n));
  // theta^2 = theta^1 - alpha g_1 with theta^1 = theta.
  const Array& g = r.fast_grads[0].at("policy.out.bias");
  const Array& th = p.at("policy.out.bias");
  const Array after1 = tesp::sgd_step(th, Array(th.shape(), 0.1), g);
  const Array after2 = tesp::sgd_step(after1, Array(th.shape(), 0.1), r.fast_grads[1].at("policy.out.bias"));
  CHECK(r.fast_params.at("policy.out.bias") == after2);
}

TEST_CASE("Meta-SGD with every rate equal to c reproduces MAML with c bit-exactly") {
  const auto m = maml(0.05);
  const auto s = meta_sgd(0.05);
  Rng i1(8), i2(8);
  const auto pm = m.initialize(i1);
  const auto ps = s.initialize(i2);
  for (const auto& n : pm.names()) CHECK(pm.at(n) == ps.at(n));
  Rng a(3), b(3);
  const auto rm = maml_adapt(m, pm, kTask, a);
  const auto rs = meta_sgd_adapt(s, ps, kTask, b);
  CHECK(rm.fast_params == rs.fast_params);
  for (std::size_t i = 0; i < rm.final_episodes.size(); ++i)
    CHECK(rm.final_episodes[i].return_ == rs.final_episodes[i].return_);
}

TEST_CASE("Meta-SGD: rate shapes mirror the policy and a zero rate freezes its array") {
  const auto s = meta_sgd();
  Rng init(1);
  auto p = s.initialize(init);
  for (const auto& n : p.names_with_prefix("policy.")) CHECK(p.at("meta.alpha." + n).shape() == p.at(n).shape());
  CHECK(p.names_with_prefix("meta.alpha.").size() == p.names_with_prefix("policy.").size());

  p.set("meta.alpha.policy.layer0.weight", Array(p.at("policy.layer0.weight").shape(), 0.0));
  Rng rng(5);
  const auto r = meta_sgd_adapt(s, p, kTask, rng);
  CHECK(r.fast_params.at("policy.layer0.weight") == p.at("policy.layer0.weight"));
  CHECK(r.fast_params.at("policy.layer0.bias") != p.at("policy.layer0.bias"));
  CHECK(r.fast_params.at("policy.out.weight") != p.at("policy.out.weight"));
}

TEST_CASE("AdaptSV: one shared latent start, policy never adapted") {
  const auto l = latent();
  Rng init(1);
  const auto p = l.initialize(init);
  CHECK(p.at(tesp::kLatentName) == Array(Shape{3}, 0.0));
  CHECK(l.fast_names(p) == std::vector<std::string>{tesp::kLatentName});
  CHECK(p.names_with_prefix("encoder.").empty());

  const envs::TaskSpec other{kTask.env, {-0.7, 0.1}, 9};
  Rng a(2), b(2);
  const auto ra = adapt_sv(l, p, kTask, a);
  const auto rb = adapt_sv(l, p, other, b);
  CHECK(ra.trace.sampling_embeddings[0] == rb.trace.sampling_embeddings[0]);
  CHECK(ra.fast_params.size() == 1);
  CHECK(ra.embedding != rb.embedding);
  CHECK(ra.embedding == ra.fast_params.at(tesp::kLatentName));
  CHECK_FALSE(ra.buffer.has_value());
}

TEST_CASE("AdaptSV with K = 0 gives every task the same action distribution") {
  const auto l = latent(0);
  Rng init(1);
  const auto p = l.initialize(init);
  const envs::TaskSpec other{kTask.env, {-0.7, 0.1}, 9};
  Rng a(2), b(7);
  const auto ra = adapt_sv(l, p, kTask, a);
  const auto rb = adapt_sv(l, p, other, b);
  CHECK(ra.embedding == rb.embedding);

  diff::Tape t;
  const auto pv = nets::PolicyVars::from(nets::bind_constants(t, p), l.spec().policy);
  const Array states = Array::matrix(3, 4, {0.1, 0.2, 0.0, 0.0, -0.5, 0.3, 0.1, 0.1, 0.9, -0.9, 0.2, 0.0});
  const auto ha = nets::policy_forward(pv, t.constant(states), t.constant(ra.embedding));
  const auto hb = nets::policy_forward(pv, t.constant(states), t.constant(rb.embedding));
  CHECK(ha.mean.value() == hb.mean.value());
  CHECK(ha.std.value() == hb.std.value());
}

TEST_CASE("adapt entry points reject a learner of the wrong family") {
  const auto l = latent();
  Rng init(1), rng(1);
  const auto p = l.initialize(init);
  CHECK_THROWS_AS(maml_adapt(l, p, kTask, rng), std::invalid_argument);
  const auto m = maml(0.1);
  CHECK_THROWS_AS(adapt_sv(m, p, kTask, rng), std::invalid_argument);
}

TEST_CASE("baseline meta-gradients reach the learned rates and the latent") {
  const auto s = meta_sgd();
  Rng i1(3), r1(4);
  const auto ps = s.initialize(i1);
  const auto gs = s.meta_gradient(ps, meta_sgd_adapt(s, ps, kTask, r1));
  CHECK(gs.grads.at("meta.alpha.policy.out.weight").l2_norm() > 0.0);
  CHECK(gs.penalty == 0.0);

  const auto l = latent();
  Rng i2(3), r2(4);
  const auto pl = l.initialize(i2);
  const auto gl = l.meta_gradient(pl, adapt_sv(l, pl, kTask, r2));
  CHECK(gl.grads.at(tesp::kLatentName).l2_norm() > 0.0);
  CHECK(gl.grads.at("meta.alpha.adaptsv.latent").l2_norm() > 0.0);
}

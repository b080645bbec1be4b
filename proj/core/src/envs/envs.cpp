#include "metarl/envs/envs.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "metarl/util/rng.hpp"

namespace metarl::envs {

EnvId EnvId::parse(const std::string& text) {
  if (text == "point_nav") return EnvId{EnvKind::point_nav, 0};
  const std::string prefix = "reacher_";
  if (text.starts_with(prefix) && text.size() > prefix.size()) {
    const std::string digits = text.substr(prefix.size());
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
        digits.size() <= 3) {
      const std::size_t k = std::stoul(digits);
      if (k >= 1) return EnvId{EnvKind::reacher, k};
    }
  }
  throw std::invalid_argument("unknown environment '" + text + "' (expected point_nav or reacher_<k>)");
}

std::string EnvId::to_string() const {
  return kind == EnvKind::point_nav ? std::string("point_nav") : "reacher_" + std::to_string(links);
}

void EnvConstants::validate() const {
  if (horizon < 1) throw std::invalid_argument("env: horizon must be >= 1");
  if (!(dt > 0.0) || !(v_max > 0.0) || !(omega_max > 0.0) || !(link_length > 0.0) || !(c_ctrl >= 0.0)) {
    throw std::invalid_argument("env: dt, v_max, omega_max, link_length must be positive and c_ctrl >= 0");
  }
  if (!(r1 > 0.0) || !(r1 < r2)) throw std::invalid_argument("env: require 0 < r1 < r2");
}

Region parse_region(const std::string& text) {
  if (text == "train" || text == "D") return Region::train;
  if (text == "iid_test" || text == "D_prime") return Region::iid_test;
  if (text == "ood_test" || text == "D_double_prime") return Region::ood_test;
  throw std::invalid_argument("unknown split '" + text + "' (expected D, D_prime or D_double_prime)");
}

std::string region_name(Region region) {
  switch (region) {
    case Region::train:
      return "D";
    case Region::iid_test:
      return "D_prime";
    case Region::ood_test:
      return "D_double_prime";
  }
  return "?";
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Environment::Environment(EnvId id, EnvConstants constants) : id_(id), constants_(constants) {
  constants_.validate();
  if (id_.kind == EnvKind::reacher && id_.links < 1) throw std::invalid_argument("reacher needs >= 1 link");
}

std::size_t Environment::state_dim() const { return id_.kind == EnvKind::point_nav ? 4 : 2 * id_.links + 2; }

std::size_t Environment::action_dim() const { return id_.kind == EnvKind::point_nav ? 2 : id_.links; }

EnvState Environment::reset(const TaskSpec&) const {
  if (id_.kind == EnvKind::point_nav) return PointState{};
  return ReacherState{std::vector<double>(id_.links, 0.0)};
}

Vec2 Environment::effector(const EnvState& state) const {
  if (const auto* p = std::get_if<PointState>(&state)) return p->position;
  const auto& r = std::get<ReacherState>(state);
  Vec2 e{0.0, 0.0};
  double cumulative = 0.0;
  for (double a : r.angles) {
    cumulative += a;
    e[0] += constants_.link_length * std::cos(cumulative);
    e[1] += constants_.link_length * std::sin(cumulative);
  }
  return e;
}

StepResult Environment::step(const TaskSpec& task, const EnvState& state, std::span<const double> action,
                             std::size_t step_count) const {
  if (action.size() != action_dim()) {
    throw std::invalid_argument("step: action has " + std::to_string(action.size()) + " dims, expected " +
                                std::to_string(action_dim()));
  }
  std::vector<double> a(action.begin(), action.end());
  double ctrl = 0.0;
  for (double& v : a) {
    if (!std::isfinite(v)) throw std::domain_error("step: non-finite action");
    v = std::clamp(v, -1.0, 1.0);
    ctrl += v * v;
  }

  StepResult out;
  if (const auto* p = std::get_if<PointState>(&state)) {
    PointState next;
    for (int i = 0; i < 2; ++i) {
      next.velocity[i] = 0.8 * p->velocity[i] + 0.2 * a[i] * constants_.v_max;
      next.position[i] = p->position[i] + constants_.dt * next.velocity[i];
    }
    out.next_state = next;
  } else {
    ReacherState next = std::get<ReacherState>(state);
    for (std::size_t j = 0; j < next.angles.size(); ++j) {
      next.angles[j] = wrap_angle(next.angles[j] + constants_.dt * a[j] * constants_.omega_max);
    }
    out.next_state = std::move(next);
  }
  const Vec2 e = effector(out.next_state);
  out.distance_reward = -std::hypot(e[0] - task.goal[0], e[1] - task.goal[1]);
  out.reward = out.distance_reward - constants_.c_ctrl * ctrl;
  out.step_count = step_count + 1;
  out.done = out.step_count >= constants_.horizon;
  return out;
}

Array Environment::observation(const TaskSpec&, const EnvState& state) const {
  if (const auto* p = std::get_if<PointState>(&state)) {
    return Array::vector({p->position[0], p->position[1], p->velocity[0], p->velocity[1]});
  }
  const auto& r = std::get<ReacherState>(state);
  std::vector<double> obs;
  obs.reserve(state_dim());
  for (double a : r.angles) {
    obs.push_back(std::cos(a));
    obs.push_back(std::sin(a));
  }
  const Vec2 e = effector(state);
  obs.push_back(e[0]);
  obs.push_back(e[1]);
  return Array::vector(std::move(obs));
}

std::vector<TaskSpec> sample_task_set(const EnvId& env, std::size_t count, Region region, std::uint64_t seed,
                                      const EnvConstants& constants) {
  constants.validate();
  Stream stream = Stream::tasks_train;
  std::int64_t id_base = 0;
  if (region == Region::iid_test) {
    stream = Stream::tasks_iid;
    id_base = 100000;
  } else if (region == Region::ood_test) {
    stream = Stream::tasks_ood;
    id_base = 200000;
  }
  Rng rng = make_rng(seed, stream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  const double inner = region == Region::ood_test ? constants.r1 : 0.0;
  const double outer = region == Region::ood_test ? constants.r2 : constants.r1;

  std::vector<TaskSpec> tasks;
  tasks.reserve(count);
  while (tasks.size() < count) {
    // Area-uniform radius; rejection keeps the bounds strict after rounding.
    const double rho = std::sqrt(inner * inner + unit(rng) * (outer * outer - inner * inner));
    const double phi = angle(rng);
    const Vec2 goal{rho * std::cos(phi), rho * std::sin(phi)};
    const double norm = std::hypot(goal[0], goal[1]);
    if (!(norm < outer) || !(norm > inner || region != Region::ood_test)) continue;
    tasks.push_back(TaskSpec{env, goal, id_base + static_cast<std::int64_t>(tasks.size())});
  }
  return tasks;
}

void write_task_set(std::ostream& out, std::span<const TaskSpec> tasks) {
  out << "task_id\tenv_kind\tgoal_x\tgoal_y\n";
  for (const TaskSpec& t : tasks) {
    out << fmt::format("{}\t{}\t{:.9g}\t{:.9g}\n", t.task_id, t.env.to_string(), t.goal[0], t.goal[1]);
  }
}

}  // namespace metarl::envs

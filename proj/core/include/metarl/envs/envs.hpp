#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "metarl/diff/array.hpp"

namespace metarl::envs {

using diff::Array;
using Vec2 = std::array<double, 2>;

enum class EnvKind { point_nav, reacher };

// "point_nav", "reacher_2", "reacher_4", ... (reacher_k for any k >= 1).
struct EnvId {
  EnvKind kind = EnvKind::point_nav;
  std::size_t links = 0;  // reacher only

  static EnvId parse(const std::string& text);
  std::string to_string() const;
  friend bool operator==(const EnvId&, const EnvId&) = default;
};

struct EnvConstants {
  std::size_t horizon = 32;
  double dt = 0.1;
  double v_max = 2.0;
  double omega_max = std::numbers::pi / 2.0;
  double link_length = 0.5;
  double c_ctrl = 0.01;
  double r1 = 1.0;  // training / in-distribution disc radius
  double r2 = 2.0;  // outer radius of the out-of-distribution annulus

  void validate() const;
};

struct TaskSpec {
  EnvId env;
  Vec2 goal{0.0, 0.0};
  std::int64_t task_id = 0;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct PointState {
  Vec2 position{0.0, 0.0};
  Vec2 velocity{0.0, 0.0};
};

struct ReacherState {
  std::vector<double> angles;  // wrapped to (-pi, pi]
};

using EnvState = std::variant<PointState, ReacherState>;

struct StepResult {
  EnvState next_state;
  double reward = 0.0;           // distance_reward - c_ctrl * |a|^2
  double distance_reward = 0.0;  // -|effector - goal|
  bool done = false;
  std::size_t step_count = 0;
};

enum class Region { train, iid_test, ood_test };

Region parse_region(const std::string& text);
std::string region_name(Region region);

// Deterministic kinematic environments. The goal never appears in the
// observation; only the reward depends on it.
class Environment {
 public:
  Environment(EnvId id, EnvConstants constants);

  const EnvId& id() const { return id_; }
  const EnvConstants& constants() const { return constants_; }
  std::size_t state_dim() const;
  std::size_t action_dim() const;
  std::size_t horizon() const { return constants_.horizon; }

  EnvState reset(const TaskSpec& task) const;
  // `step_count` is the number of steps already taken in the episode.
  StepResult step(const TaskSpec& task, const EnvState& state, std::span<const double> action,
                  std::size_t step_count) const;
  Array observation(const TaskSpec& task, const EnvState& state) const;
  // Point position, or reacher end-effector via forward kinematics.
  Vec2 effector(const EnvState& state) const;

 private:
  EnvId id_;
  EnvConstants constants_;
};

// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

// `count` goals uniform over the disc |g| < r1 (train, iid_test) or the
// annulus r1 < |g| < r2 (ood_test). Deterministic in `seed`; each region
// draws from its own seed namespace.
std::vector<TaskSpec> sample_task_set(const EnvId& env, std::size_t count, Region region, std::uint64_t seed,
                                      const EnvConstants& constants);

// Tab-separated export: task_id, env_kind, goal_x, goal_y.
void write_task_set(std::ostream& out, std::span<const TaskSpec> tasks);

}  // namespace metarl::envs

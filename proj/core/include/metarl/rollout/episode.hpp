#pragma once

#include <cstddef>
#include <vector>

#include "metarl/diff/array.hpp"

namespace metarl::rollout {

using diff::Array;

// One (s, a, r) triplet plus what the learners need alongside it.
struct Transition {
  Array state;            // observation at time t
  Array action;           // sampled action, before environment clipping
  double reward = 0.0;    // full reward (distance + control cost)
  double distance_reward = 0.0;
  double logprob = 0.0;   // log pi(a | s, h) at sampling time
};

struct Episode {
  std::vector<Transition> steps;
  double return_ = 0.0;  // sum of rewards, kept in sync by finalize()

  std::size_t size() const { return steps.size(); }
  double distance_return() const;
  // Recomputes return_ from the rewards.
  void finalize();
};

// Sum of rewards of one episode.
double episode_return(const Episode& episode);

}  // namespace metarl::rollout

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "metarl/envs/envs.hpp"
#include "metarl/nets/nets.hpp"
#include "metarl/rollout/episode.hpp"
#include "metarl/util/rng.hpp"

namespace metarl::rollout {

// Everything needed to act: the shared policy parameters and architecture.
struct PolicyHandle {
  const nets::ParameterStore* params = nullptr;
  const nets::PolicyConfig* config = nullptr;
};

struct SampleOptions {
  // Act with the mean action (std forced to 0). Log-probabilities are still
  // evaluated under the policy's std.
  bool deterministic = false;
};

// Samples `count` episodes of the environment horizon. All episodes run in
// lockstep so the policy is evaluated once per timestep for the whole batch;
// the draw order is (timestep, episode, action dim). `embedding` may be empty
// for observation-only policies.
std::vector<Episode> sample_episodes(const envs::Environment& env, const envs::TaskSpec& task,
                                     const PolicyHandle& policy, const Array& embedding, std::size_t count,
                                     Rng& rng, const SampleOptions& options = {});

// The M highest-return episodes (stable: equal returns keep input order).
// M >= |episodes| returns all of them, sorted.
std::vector<Episode> select_top(std::vector<Episode> episodes, std::size_t m);

// Per-task store of the best M episodes ever offered. Ties are broken in
// favour of the episode inserted first.
class EpisodeBuffer {
 public:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  explicit EpisodeBuffer(std::size_t capacity);

  void update(std::span<const Episode> episodes);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // Sorted by return, descending.
  std::vector<const Episode*> episodes() const;
  // Insertion sequence numbers of the stored episodes, same order as episodes().
  std::vector<std::uint64_t> insertion_ids() const;
  std::uint64_t offered() const { return next_id_; }

 private:
  struct Entry {
    Episode episode;
    std::uint64_t id;
  };
  std::size_t capacity_;
  std::uint64_t next_id_ = 0;
  std::vector<Entry> entries_;
};

// Tab-separated per-step dump: task_id, iteration, episode, t, state..., action..., reward.
void write_episodes(std::ostream& out, std::int64_t task_id, std::size_t iteration,
                    std::span<const Episode> episodes);

}  // namespace metarl::rollout

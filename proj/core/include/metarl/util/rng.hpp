#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace metarl {

using Rng = std::mt19937_64;

// Stream tags keep the draws of different consumers of a run seed disjoint.
enum class Stream : std::uint32_t {
  init = 1,
  batch = 2,
  adapt = 3,
  eval = 4,
  tasks_train = 10,
  tasks_iid = 11,
  tasks_ood = 12,
  test = 99,
};

// Derives an independent generator from a run seed, a stream tag and any
// number of indices (task id, meta-iteration, ...).
inline Rng make_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> indices = {}) {
  std::seed_seq::result_type words[16];
  std::size_t n = 0;
  words[n++] = static_cast<std::uint32_t>(seed);
  words[n++] = static_cast<std::uint32_t>(seed >> 32);
  words[n++] = static_cast<std::uint32_t>(stream);
  for (std::uint64_t i : indices) {
    if (n + 2 > std::size(words)) break;
    words[n++] = static_cast<std::uint32_t>(i);
    words[n++] = static_cast<std::uint32_t>(i >> 32);
  }
  std::seed_seq seq(words, words + n);
  return Rng(seq);
}

}  // namespace metarl

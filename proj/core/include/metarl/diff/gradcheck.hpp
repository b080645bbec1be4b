#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metarl/diff/tape.hpp"

namespace metarl::diff {

// Builds a scalar loss on `tape` from leaf Vars holding the check inputs.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> leaves)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Elements probed per leaf; leaves smaller than this are probed fully.
  std::size_t probes_per_leaf = 8;
  // Denominator floor of the relative error, guards exactly-zero gradients.
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  std::string worst;  // "leaf <i> element <j>: reverse=<a> numeric=<n>"
};

double relative_error(double analytic, double numeric, double floor);

// Compares reverse-mode gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h, evaluating the loss with every perturbation on a
// fresh tape.
GradCheckResult check_gradients(const LossBuilder& loss, const std::vector<Array>& inputs,
                                const GradCheckOptions& options = {});

}  // namespace metarl::diff

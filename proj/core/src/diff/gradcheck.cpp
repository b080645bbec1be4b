#include "metarl/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace metarl::diff {
namespace {

double evaluate(const LossBuilder& loss, const std::vector<Array>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Array& a : inputs) leaves.push_back(tape.constant(a));
  return loss(tape, leaves).value().item();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(const LossBuilder& loss, const std::vector<Array>& inputs,
                                const GradCheckOptions& options) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Array& a : inputs) leaves.push_back(tape.parameter(a));
  Var out = loss(tape, leaves);
  tape.backward(out);

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  std::vector<Array> probe = inputs;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    const Array analytic = leaves[li].grad();
    std::vector<std::size_t> elements(inputs[li].size());
    std::iota(elements.begin(), elements.end(), std::size_t{0});
    if (elements.size() > options.probes_per_leaf) {
      std::shuffle(elements.begin(), elements.end(), rng);
      elements.resize(options.probes_per_leaf);
    }
    for (std::size_t e : elements) {
      const double x0 = inputs[li][e];
      probe[li][e] = x0 + options.step;
      const double up = evaluate(loss, probe);
      probe[li][e] = x0 - options.step;
      const double down = evaluate(loss, probe);
      probe[li][e] = x0;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[e], numeric, options.denominator_floor);
      ++result.probes;
      if (err > result.max_relative_error || result.worst.empty()) {
        if (err >= result.max_relative_error) {
          result.max_relative_error = err;
          std::ostringstream os;
          os.precision(12);
          os << "leaf " << li << " element " << e << ": reverse=" << analytic[e] << " numeric=" << numeric;
          result.worst = os.str();
        }
      }
    }
  }
  return result;
}

}  // namespace metarl::diff

#pragma once

#include <cstddef>

#include "metarl/diff/tape.hpp"

// Differentiable ops over Vars. Binary elementwise ops require identical
// shapes; use broadcast() explicitly. Shape mismatches throw
// std::invalid_argument naming the op and both shapes.
namespace metarl::diff {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var x);
Var scale(Var x, double factor);
// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
// Sum / mean of all elements; result has shape [].
Var sum(Var x);
Var mean(Var x);
// Concatenation along the last axis; leading dimensions must agree.
Var concat(Var a, Var b);
// Elements [begin, end) along `axis`.
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
// Right-aligned broadcasting of size-1 (or missing) dimensions up to `shape`.
Var broadcast(Var x, const Shape& shape);
Var reshape(Var x, const Shape& shape);
// Gradient is passed only where lo < x < hi.
Var clip(Var x, double lo, double hi);
// Gradient goes to the larger (smaller) argument; ties go to `a`.
Var maximum(Var a, Var b);
Var minimum(Var a, Var b);
// Identity on values, zero gradient.
Var stop_gradient(Var x);

}  // namespace metarl::diff

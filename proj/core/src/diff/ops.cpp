#include "metarl/diff/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace metarl::diff {
namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void require_same_tape(const char* op, Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands must live on the same tape");
  }
}

void require_same_shape(const char* op, Var a, Var b) {
  require_same_tape(op, a, b);
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

template <typename F>
Array map(const Array& x, F&& f) {
  Array out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Elementwise unary op whose derivative is expressed through (x, y).
template <typename F, typename D>
Var unary(const char* kind, Var x, F&& f, D&& dfdx) {
  Tape& t = x.tape();
  const bool rg = x.requires_grad();
  const std::size_t xi = x.id();
  return t.record(kind, map(x.value(), f), rg, [xi, dfdx](Tape& tp, std::size_t self, const Array& g) {
    const Array& xv = tp.value(xi);
    const Array& yv = tp.value(self);
    Array& slot = tp.grad_slot(xi);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

std::size_t dim_or_one(const Shape& s, std::size_t from_right) {
  if (from_right >= s.size()) return 1;
  return s[s.size() - 1 - from_right];
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Array out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("add", std::move(out), a.requires_grad() || b.requires_grad(),
                         [ai, bi](Tape& t, std::size_t, const Array& g) {
                           t.accumulate(ai, g);
                           t.accumulate(bi, g);
                         });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Array out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("sub", std::move(out), a.requires_grad() || b.requires_grad(),
                         [ai, bi](Tape& t, std::size_t, const Array& g) {
                           t.accumulate(ai, g);
                           if (t.requires_grad(bi)) {
                             Array& slot = t.grad_slot(bi);
                             for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i];
                           }
                         });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Array out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("mul", std::move(out), a.requires_grad() || b.requires_grad(),
                         [ai, bi](Tape& t, std::size_t, const Array& g) {
                           if (t.requires_grad(ai)) {
                             const Array& bv = t.value(bi);
                             Array& slot = t.grad_slot(ai);
                             for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * bv[i];
                           }
                           if (t.requires_grad(bi)) {
                             const Array& av = t.value(ai);
                             Array& slot = t.grad_slot(bi);
                             for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * av[i];
                           }
                         });
}

Var neg(Var x) { return scale(x, -1.0); }

Var scale(Var x, double factor) {
  const std::size_t xi = x.id();
  return x.tape().record("scale", map(x.value(), [factor](double v) { return v * factor; }), x.requires_grad(),
                         [xi, factor](Tape& t, std::size_t, const Array& g) {
                           Array& slot = t.grad_slot(xi);
                           for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * factor;
                         });
}

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(av.shape()) + " vs " +
                                shape_string(bv.shape()));
  }
  const Eigen::Index m = static_cast<Eigen::Index>(av.rows()), k = static_cast<Eigen::Index>(av.cols()),
                     n = static_cast<Eigen::Index>(bv.cols());
  Array out(Shape{av.rows(), bv.cols()});
  MatMap(out.data().data(), m, n).noalias() = ConstMatMap(av.data().data(), m, k) * ConstMatMap(bv.data().data(), k, n);
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(
      "matmul", std::move(out), a.requires_grad() || b.requires_grad(),
      [ai, bi, m, k, n](Tape& t, std::size_t, const Array& g) {
        const ConstMatMap G(g.data().data(), m, n);
        if (t.requires_grad(ai)) {
          MatMap(t.grad_slot(ai).data().data(), m, k).noalias() += G * ConstMatMap(t.value(bi).data().data(), k, n).transpose();
        }
        if (t.requires_grad(bi)) {
          MatMap(t.grad_slot(bi).data().data(), k, n).noalias() += ConstMatMap(t.value(ai).data().data(), m, k).transpose() * G;
        }
      });
}

Var tanh(Var x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double xv, double) { return 1.0 / xv; });
}

Var square(Var x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double xv, double) { return 2.0 * xv; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record("sum", Array::scalar(s), x.requires_grad(), [xi](Tape& t, std::size_t, const Array& g) {
    const double gv = g[0];
    for (double& d : t.grad_slot(xi).data()) d += gv;
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record("mean", Array::scalar(s / n), x.requires_grad(),
                         [xi, n](Tape& t, std::size_t, const Array& g) {
                           const double gv = g[0] / n;
                           for (double& d : t.grad_slot(xi).data()) d += gv;
                         });
}

Var concat(Var a, Var b) {
  require_same_tape("concat", a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() == 0 || av.rank() != bv.rank() || av.rank() > 2 || av.rows() != bv.rows()) {
    throw std::invalid_argument("concat: shape mismatch " + shape_string(av.shape()) + " vs " +
                                shape_string(bv.shape()));
  }
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols(), c = ca + cb;
  Shape shape = av.shape();
  shape.back() = c;
  Array out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ca; ++j) out[r * c + j] = av[r * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[r * c + ca + j] = bv[r * cb + j];
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("concat", std::move(out), a.requires_grad() || b.requires_grad(),
                         [ai, bi, rows, ca, cb, c](Tape& t, std::size_t, const Array& g) {
                           if (t.requires_grad(ai)) {
                             Array& slot = t.grad_slot(ai);
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < ca; ++j) slot[r * ca + j] += g[r * c + j];
                           }
                           if (t.requires_grad(bi)) {
                             Array& slot = t.grad_slot(bi);
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < cb; ++j) slot[r * cb + j] += g[r * c + ca + j];
                           }
                         });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Array& xv = x.value();
  if (axis >= xv.rank() || begin > end || end > xv.shape()[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") on axis " + std::to_string(axis) + " invalid for shape " +
                                shape_string(xv.shape()));
  }
  // View as [outer, dim, inner] around `axis`.
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.shape()[i];
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.shape()[i];
  const std::size_t dim = xv.shape()[axis], len = end - begin;
  Shape shape = xv.shape();
  shape[axis] = len;
  Array out(shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t d = 0; d < len; ++d)
      for (std::size_t i = 0; i < inner; ++i) out[(o * len + d) * inner + i] = xv[(o * dim + begin + d) * inner + i];
  const std::size_t xi = x.id();
  return x.tape().record("slice", std::move(out), x.requires_grad(),
                         [xi, outer, inner, dim, len, begin](Tape& t, std::size_t, const Array& g) {
                           Array& slot = t.grad_slot(xi);
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t d = 0; d < len; ++d)
                               for (std::size_t i = 0; i < inner; ++i)
                                 slot[(o * dim + begin + d) * inner + i] += g[(o * len + d) * inner + i];
                         });
}

Var broadcast(Var x, const Shape& shape) {
  const Shape& xs = x.shape();
  if (xs.size() > shape.size() || shape.size() > 2) {
    throw std::invalid_argument("broadcast: cannot broadcast " + shape_string(xs) + " to " + shape_string(shape));
  }
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const std::size_t have = dim_or_one(xs, k), want = dim_or_one(shape, k);
    if (have != want && have != 1) {
      throw std::invalid_argument("broadcast: cannot broadcast " + shape_string(xs) + " to " + shape_string(shape));
    }
  }
  const std::size_t rows = dim_or_one(shape, 1), cols = dim_or_one(shape, 0);
  const std::size_t xr = dim_or_one(xs, 1), xc = dim_or_one(xs, 0);
  const Array& xv = x.value();
  Array out(shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[(xr == 1 ? 0 : r) * xc + (xc == 1 ? 0 : c)];
  const std::size_t xi = x.id();
  return x.tape().record("broadcast", std::move(out), x.requires_grad(),
                         [xi, rows, cols, xr, xc](Tape& t, std::size_t, const Array& g) {
                           Array& slot = t.grad_slot(xi);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < cols; ++c)
                               slot[(xr == 1 ? 0 : r) * xc + (xc == 1 ? 0 : c)] += g[r * cols + c];
                         });
}

Var reshape(Var x, const Shape& shape) {
  const std::size_t xi = x.id();
  return x.tape().record("reshape", x.value().reshaped(shape), x.requires_grad(),
                         [xi](Tape& t, std::size_t, const Array& g) {
                           Array& slot = t.grad_slot(xi);
                           for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
                         });
}

Var clip(Var x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clip: lo must not exceed hi");
  return unary(
      "clip", x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double xv, double) { return (xv > lo && xv < hi) ? 1.0 : 0.0; });
}

Var maximum(Var a, Var b) {
  require_same_shape("maximum", a, b);
  Array out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] >= bd[i] ? out[i] : bd[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("maximum", std::move(out), a.requires_grad() || b.requires_grad(),
                         [ai, bi](Tape& t, std::size_t, const Array& g) {
                           const Array& av = t.value(ai);
                           const Array& bv = t.value(bi);
                           const bool ga = t.requires_grad(ai), gb = t.requires_grad(bi);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (av[i] >= bv[i]) {
                               if (ga) t.grad_slot(ai)[i] += g[i];
                             } else if (gb) {
                               t.grad_slot(bi)[i] += g[i];
                             }
                           }
                         });
}

Var minimum(Var a, Var b) {
  require_same_shape("minimum", a, b);
  Array out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] <= bd[i] ? out[i] : bd[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("minimum", std::move(out), a.requires_grad() || b.requires_grad(),
                         [ai, bi](Tape& t, std::size_t, const Array& g) {
                           const Array& av = t.value(ai);
                           const Array& bv = t.value(bi);
                           const bool ga = t.requires_grad(ai), gb = t.requires_grad(bi);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (av[i] <= bv[i]) {
                               if (ga) t.grad_slot(ai)[i] += g[i];
                             } else if (gb) {
                               t.grad_slot(bi)[i] += g[i];
                             }
                           }
                         });
}

Var stop_gradient(Var x) { return x.tape().record("stop_gradient", x.value(), false, nullptr); }

}  // namespace metarl::diff

#include "metarl/diff/tape.hpp"

#include <stdexcept>
#include <string>

namespace metarl::diff {

const Array& Var::value() const { return tape_->value(id_); }

Array Var::grad() const { return tape_->grad(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::parameter(Array value) { return record("parameter", std::move(value), true, nullptr); }

Var Tape::constant(Array value) { return record("constant", std::move(value), false, nullptr); }

Var Tape::record(std::string_view kind, Array value, bool requires_grad, BackwardFn fn) {
  if (!value.all_finite()) {
    throw std::domain_error(std::string(kind) + ": produced a non-finite value (shape " +
                            shape_string(value.shape()) + ")");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.kind = kind;
  if (requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Array Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.has_grad) return n.grad;
  return Array(n.value.shape(), 0.0);
}

Array& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Array(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Array& g) {
  if (!nodes_[id].requires_grad) return;
  Array& slot = grad_slot(id);
  if (slot.size() != g.size()) {
    throw std::logic_error("accumulate: gradient shape " + shape_string(g.shape()) + " does not match node shape " +
                           shape_string(slot.shape()));
  }
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const Array& v = nodes_[loss.id()].value;
  if (v.size() != 1 || v.rank() > 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_string(v.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Array();
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad_slot(loss.id()) = Array(v.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // Parents always precede the node, so the closure never touches n.grad.
    n.backward(*this, i, n.grad);
  }
}

}  // namespace metarl::diff

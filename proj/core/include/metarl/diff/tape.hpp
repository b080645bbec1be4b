#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "metarl/diff/array.hpp"

namespace metarl::diff {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid until the tape is
// cleared or destroyed.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Array& value() const;
  Shape shape() const { return value().shape(); }  // by value: tape storage may move
  // d(loss)/d(this) after Tape::backward; zeros if the node received none.
  Array grad() const;
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records nodes in creation order; creation order is a topological order, so
// backward is a single reverse sweep.
//
// Nodes that do not depend on any parameter carry no backward rule and are
// skipped by the sweep. Non-finite values are rejected at creation time.
class Tape {
 public:
  // Receives the node's own id and the gradient flowing into it, and pushes
  // contributions to its parents through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, std::size_t self, const Array& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Array value);
  Var constant(Array value);

  // Records an op result. `fn` is kept only when `requires_grad` is set.
  Var record(std::string_view kind, Array value, bool requires_grad, BackwardFn fn);

  void backward(Var loss);

  const Array& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
  Array grad(std::size_t id) const;

  // Adds `g` into the gradient slot of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Array& g);
  // Mutable gradient slot of node `id`, zero-initialized on first access.
  Array& grad_slot(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Array value;
    Array grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::string_view kind;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

}  // namespace metarl::diff

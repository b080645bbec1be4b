#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "metarl/diff/array.hpp"
#include "metarl/diff/tape.hpp"

namespace metarl::nets {

using diff::Array;
using diff::Shape;
using diff::Tape;
using diff::Var;

// Named parameter arrays keyed by dotted path ("encoder.gru.w_z",
// "policy.layer0.weight", "meta.alpha.encoder.gru.w_z", ...). Iteration is
// in lexicographic name order.
class ParameterStore {
 public:
  using Map = std::map<std::string, Array, std::less<>>;

  // Inserts a new entry; throws if the name exists.
  void add(std::string name, Array value);
  bool contains(std::string_view name) const;
  const Array& at(std::string_view name) const;
  // Replaces the values of an existing entry; the shape must not change.
  void set(std::string_view name, Array value);
  Array& mutable_at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  double l2_norm() const;
  bool all_finite() const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  Map entries_;
};

// name -> Var mapping used to evaluate networks on a tape.
using VarMap = std::map<std::string, Var, std::less<>>;

// Binds every entry of `store` as a leaf on `tape`; entries for which
// `trainable(name)` is true become parameters, the rest constants.
VarMap bind(Tape& tape, const ParameterStore& store, const std::function<bool(std::string_view)>& trainable);
VarMap bind_constants(Tape& tape, const ParameterStore& store);

Var lookup(const VarMap& vars, std::string_view name);

// Checkpoint records: little-endian sequence of
//   u32 name_length, name bytes, u32 rank, u64 dims[rank], f64 values[]
// preceded by a u64 record count.
void write_parameters(std::ostream& out, const ParameterStore& store);
ParameterStore read_parameters(std::istream& in);

}  // namespace metarl::nets

#include "metarl/nets/parameter_store.hpp"

#include <cmath>
#include <stdexcept>

#include "metarl/util/binary_io.hpp"

namespace metarl::nets {

void ParameterStore::add(std::string name, Array value) {
  if (entries_.contains(name)) throw std::invalid_argument("ParameterStore: duplicate name '" + name + "'");
  entries_.emplace(std::move(name), std::move(value));
}

bool ParameterStore::contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

const Array& ParameterStore::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParameterStore: missing parameter '" + std::string(name) + "'");
  return it->second;
}

Array& ParameterStore::mutable_at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParameterStore: missing parameter '" + std::string(name) + "'");
  return it->second;
}

void ParameterStore::set(std::string_view name, Array value) {
  Array& slot = mutable_at(name);
  if (slot.shape() != value.shape()) {
    throw std::invalid_argument("ParameterStore: shape of '" + std::string(name) + "' is fixed at " +
                                diff::shape_string(slot.shape()) + ", got " + diff::shape_string(value.shape()));
  }
  slot = std::move(value);
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, a] : entries_) n += a.size();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParameterStore::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) {
    if (name.starts_with(prefix)) out.push_back(name);
  }
  return out;
}

double ParameterStore::l2_norm() const {
  double s = 0.0;
  for (const auto& [_, a] : entries_)
    for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

bool ParameterStore::all_finite() const {
  for (const auto& [_, a] : entries_)
    if (!a.all_finite()) return false;
  return true;
}

VarMap bind(Tape& tape, const ParameterStore& store, const std::function<bool(std::string_view)>& trainable) {
  VarMap vars;
  for (const auto& [name, value] : store) {
    vars.emplace(name, trainable(name) ? tape.parameter(value) : tape.constant(value));
  }
  return vars;
}

VarMap bind_constants(Tape& tape, const ParameterStore& store) {
  return bind(tape, store, [](std::string_view) { return false; });
}

Var lookup(const VarMap& vars, std::string_view name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw std::out_of_range("missing parameter '" + std::string(name) + "'");
  return it->second;
}

void write_parameters(std::ostream& out, const ParameterStore& store) {
  io::write_u64(out, store.size());
  for (const auto& [name, value] : store) {
    io::write_string(out, name);
    io::write_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t d : value.shape()) io::write_u64(out, d);
    for (double v : value.data()) io::write_f64(out, v);
  }
}

ParameterStore read_parameters(std::istream& in) {
  ParameterStore store;
  const std::uint64_t count = io::read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = io::read_string(in);
    const std::uint32_t rank = io::read_u32(in);
    if (rank > 4) throw std::runtime_error("checkpoint: parameter '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = io::read_u64(in);
    const std::size_t n = diff::shape_size(shape);
    if (n > (std::size_t{1} << 28)) throw std::runtime_error("checkpoint: parameter '" + name + "' is too large");
    std::vector<double> data(n);
    for (double& v : data) v = io::read_f64(in);
    store.add(std::move(name), Array(std::move(shape), std::move(data)));
  }
  return store;
}

}  // namespace metarl::nets

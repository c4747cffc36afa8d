#include "csm/space.hpp"

#include <sstream>

#include "csm/error.hpp"

namespace csm {

DiscreteSpace::DiscreteSpace(std::vector<int> dims, std::uint64_t enumeration_cap)
    : dims_(std::move(dims)), cap_(enumeration_cap) {
  if (dims_.empty()) throw Error("DiscreteSpace: at least one dimension is required");
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (dims_[d] < 2) {
      throw Error("DiscreteSpace: dimension " + std::to_string(d) + " has " + std::to_string(dims_[d]) +
                  " categories; every dimension needs at least 2");
    }
  }
  enumerable_ = true;
  std::uint64_t total = 1;
  for (int n : dims_) {
    if (total > cap_ / static_cast<std::uint64_t>(n)) {
      enumerable_ = false;
      break;
    }
    total *= static_cast<std::uint64_t>(n);
  }
  if (total > cap_) enumerable_ = false;
  if (enumerable_) {
    total_ = total;
    strides_.assign(dims_.size(), 1);
    for (std::size_t d = dims_.size() - 1; d > 0; --d) {
      strides_[d - 1] = strides_[d] * static_cast<std::uint64_t>(dims_[d]);
    }
  }
}

DiscreteSpace DiscreteSpace::binary(std::size_t num_dims, std::uint64_t enumeration_cap) {
  return DiscreteSpace(std::vector<int>(num_dims, 2), enumeration_cap);
}

void DiscreteSpace::require_enumerable(const char* what) const {
  if (!enumerable_) {
    throw EnumerationLimit(std::string(what) + ": space exceeds the enumeration cap of " + std::to_string(cap_) +
                           " states");
  }
}

std::uint64_t DiscreteSpace::total_states() const {
  require_enumerable("total_states");
  return total_;
}

bool DiscreteSpace::contains(const State& x) const {
  if (x.size() != dims_.size()) return false;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (x[d] < 0 || x[d] >= dims_[d]) return false;
  }
  return true;
}

void DiscreteSpace::validate(const State& x) const {
  if (x.size() != dims_.size()) {
    throw InvalidState("state " + to_string(x) + " has " + std::to_string(x.size()) + " coordinates, space has " +
                       std::to_string(dims_.size()));
  }
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (x[d] < 0 || x[d] >= dims_[d]) {
      throw InvalidState("state " + to_string(x) + ": coordinate " + std::to_string(d) + " outside [0, " +
                         std::to_string(dims_[d]) + ")");
    }
  }
}

std::uint64_t DiscreteSpace::index(const State& x) const {
  require_enumerable("index");
  std::uint64_t idx = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) idx += static_cast<std::uint64_t>(x[d]) * strides_[d];
  return idx;
}

State DiscreteSpace::state(std::uint64_t index) const {
  require_enumerable("state");
  if (index >= total_) throw InvalidState("flat index " + std::to_string(index) + " out of range");
  State x(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    x[d] = static_cast<int>(index / strides_[d]);
    index %= strides_[d];
  }
  return x;
}

std::vector<State> DiscreteSpace::enumerate() const {
  require_enumerable("enumerate");
  std::vector<State> out;
  out.reserve(total_);
  State x(dims_.size(), 0);
  for (std::uint64_t k = 0; k < total_; ++k) {
    out.push_back(x);
    for (std::size_t d = dims_.size(); d-- > 0;) {
      if (++x[d] < dims_[d]) break;
      x[d] = 0;
    }
  }
  return out;
}

std::string to_string(const State& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (d) os << ',';
    os << x[d];
  }
  os << ')';
  return os.str();
}

std::size_t StateHash::operator()(const State& x) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (int v : x) {
    h ^= static_cast<std::size_t>(static_cast<unsigned>(v));
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace csm

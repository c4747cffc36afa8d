#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace csm {

/// A point of a discrete space: one category index per dimension.
using State = std::vector<int>;

/// Default cap on the number of states any operation may enumerate.
inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Product of per-dimension category sets, {0..dims[0]-1} x ... x {0..dims[D-1]-1}.
///
/// Flat indices are row-major with dimension 0 most significant, so for a
/// 2-D space the state (r, c) has index r * dims[1] + c. Flat indices exist
/// only when the space is enumerable (total states within the cap).
class DiscreteSpace {
 public:
  DiscreteSpace() = default;
  explicit DiscreteSpace(std::vector<int> dims, std::uint64_t enumeration_cap = kDefaultEnumerationCap);

  /// [2] * num_dims.
  static DiscreteSpace binary(std::size_t num_dims, std::uint64_t enumeration_cap = kDefaultEnumerationCap);

  const std::vector<int>& dims() const { return dims_; }
  std::size_t num_dims() const { return dims_.size(); }
  int dim(std::size_t d) const { return dims_[d]; }
  std::uint64_t enumeration_cap() const { return cap_; }

  bool enumerable() const { return enumerable_; }
  /// Throws EnumerationLimit when the space is not enumerable.
  std::uint64_t total_states() const;

  bool contains(const State& x) const;
  /// Throws InvalidState naming the offending coordinate.
  void validate(const State& x) const;

  std::uint64_t index(const State& x) const;
  State state(std::uint64_t index) const;
  /// Every state in flat-index order.
  std::vector<State> enumerate() const;

  bool operator==(const DiscreteSpace& other) const { return dims_ == other.dims_; }

 private:
  void require_enumerable(const char* what) const;

  std::vector<int> dims_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t cap_ = kDefaultEnumerationCap;
  std::uint64_t total_ = 0;
  bool enumerable_ = false;
};

std::string to_string(const State& x);

struct StateHash {
  std::size_t operator()(const State& x) const noexcept;
};

}  // namespace csm

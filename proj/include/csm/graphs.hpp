#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csm/space.hpp"

namespace csm {

enum class StructureKind { Chain, Cycle, Star, Grid, Complete, Explicit };

/// How Grid treats moves that leave [0, n_d).
enum class Boundary { Drop, Wrap };

StructureKind parse_structure_kind(std::string_view name);
std::string to_string(StructureKind kind);
Boundary parse_boundary(std::string_view name);
std::string to_string(Boundary boundary);

using Edge = std::pair<State, State>;

/// Maps every state to an ordered, duplicate-free list of neighbor states.
///
/// Chain, Cycle, Star, and Complete act on flat indices and need an
/// enumerable space:
///   Chain     N(k) = {k+1} for k < N-1, N(N-1) = {}
///   Cycle     N(k) = {(k+1) mod N}
///   Star      N(0) = {}, N(k) = {0} for k >= 1
///   Complete  N(k) = every other state, ascending
/// Grid lists x+e_0, x-e_0, x+e_1, x-e_1, ... and drops or wraps moves that
/// leave the range. Duplicates are removed, so a binary dimension always
/// contributes a single bit flip.
///
/// Each neighbor also has a slot in a fixed layout of max_degree() positions
/// (for Grid, slot 2d is +e_d and slot 2d+1 is -e_d). Models that emit one
/// output per slot use it to line up with states whose degree is smaller.
///
/// Structures are immutable and cheap to copy.
class NeighborhoodStructure {
 public:
  StructureKind kind() const { return kind_; }
  Boundary boundary() const { return boundary_; }
  const DiscreteSpace& space() const { return space_; }

  std::vector<State> neighbors(const State& x) const;
  std::size_t degree(const State& x) const;
  State neighbor(const State& x, std::size_t i) const;
  std::vector<std::size_t> slots(const State& x) const;
  std::size_t max_degree() const { return max_degree_; }

  /// Position of y in N(x), if present.
  std::optional<std::size_t> position_of(const State& x, const State& y) const;

  /// y in N(x) implies x in N(y) for every pair.
  bool symmetric() const { return symmetric_; }

 private:
  friend NeighborhoodStructure build_structure(StructureKind, const DiscreteSpace&, Boundary);
  friend NeighborhoodStructure build_explicit_structure(const DiscreteSpace&, const std::vector<Edge>&);

  template <typename Fn>
  void for_each_grid_candidate(const State& x, Fn&& fn) const;

  StructureKind kind_ = StructureKind::Grid;
  Boundary boundary_ = Boundary::Drop;
  DiscreteSpace space_;
  std::size_t max_degree_ = 0;
  bool symmetric_ = false;
  std::shared_ptr<const std::vector<std::vector<std::uint64_t>>> adjacency_;  // Explicit only
};

/// Throws Error for Explicit (use build_explicit_structure) and
/// EnumerationLimit when a flat-index kind gets a non-enumerable space.
NeighborhoodStructure build_structure(StructureKind kind, const DiscreteSpace& space,
                                      Boundary boundary = Boundary::Drop);

/// Edges keep their given order per source; repeats are dropped. Self-loops
/// and states outside the space throw InvalidState.
NeighborhoodStructure build_explicit_structure(const DiscreteSpace& space, const std::vector<Edge>& edges);

/// Parses `src -> dst` lines with comma-separated coordinates. Blank lines and
/// `#` comments are ignored. Errors name the line number.
std::vector<Edge> parse_edge_list(std::istream& in);
NeighborhoodStructure load_explicit_structure(const std::string& path, const DiscreteSpace& space);

struct ReverseEntry {
  State source;
  std::size_t position;  // target == neighbors(source)[position]

  bool operator==(const ReverseEntry&) const = default;
};

/// N^{-1}: for each target x', the pairs (x, i) with N(x)_i = x'.
///
/// A tabulated index enumerates all edges once. An on-the-fly index is only
/// available for symmetric structures, where the sources of x' are exactly
/// N(x'); it serves spaces too large to tabulate.
class ReverseIndex {
 public:
  static ReverseIndex tabulate(const NeighborhoodStructure& structure);
  static ReverseIndex on_the_fly(const NeighborhoodStructure& structure);

  std::vector<ReverseEntry> entries(const State& target) const;
  std::size_t count(const State& target) const;
  bool tabulated() const { return !table_.empty(); }
  const NeighborhoodStructure& structure() const { return structure_; }

 private:
  explicit ReverseIndex(NeighborhoodStructure s) : structure_(std::move(s)) {}

  NeighborhoodStructure structure_;
  std::vector<std::vector<std::pair<std::uint64_t, std::uint32_t>>> table_;
};

/// Tabulated reverse index; cost O(sum_x |N(x)|).
ReverseIndex build_reverse_index(const NeighborhoodStructure& structure);

/// True iff the undirected view of the graph restricted to `support` is
/// connected. Throws Error on an empty support.
bool is_weakly_connected(const NeighborhoodStructure& structure, const std::vector<State>& support);
/// Full-space variant; needs an enumerable space.
bool is_weakly_connected(const NeighborhoodStructure& structure);

}  // namespace csm

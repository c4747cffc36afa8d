#include "csm/graphs.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "csm/error.hpp"

namespace csm {

StructureKind parse_structure_kind(std::string_view name) {
  if (name == "chain") return StructureKind::Chain;
  if (name == "cycle") return StructureKind::Cycle;
  if (name == "star") return StructureKind::Star;
  if (name == "grid") return StructureKind::Grid;
  if (name == "complete") return StructureKind::Complete;
  if (name == "explicit") return StructureKind::Explicit;
  throw Error("unsupported structure kind '" + std::string(name) + "'");
}

std::string to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::Chain: return "chain";
    case StructureKind::Cycle: return "cycle";
    case StructureKind::Star: return "star";
    case StructureKind::Grid: return "grid";
    case StructureKind::Complete: return "complete";
    case StructureKind::Explicit: return "explicit";
  }
  return "unknown";
}

Boundary parse_boundary(std::string_view name) {
  if (name == "drop") return Boundary::Drop;
  if (name == "wrap") return Boundary::Wrap;
  throw Error("unsupported boundary policy '" + std::string(name) + "'");
}

std::string to_string(Boundary boundary) { return boundary == Boundary::Drop ? "drop" : "wrap"; }

// Calls fn(slot, candidate) for each surviving Grid move, in neighbor order.
// fn returns false to stop early.
template <typename Fn>
void NeighborhoodStructure::for_each_grid_candidate(const State& x, Fn&& fn) const {
  State y = x;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const int n = space_.dim(d);
    int plus = x[d] + 1;
    int minus = x[d] - 1;
    bool plus_ok = true;
    bool minus_ok = true;
    if (boundary_ == Boundary::Wrap) {
      plus = (plus + n) % n;
      minus = (minus + n) % n;
      minus_ok = minus != plus;
    } else {
      plus_ok = plus < n;
      minus_ok = minus >= 0;
    }
    if (plus_ok) {
      y[d] = plus;
      if (!fn(2 * d, y)) return;
    }
    if (minus_ok) {
      y[d] = minus;
      if (!fn(2 * d + 1, y)) return;
    }
    y[d] = x[d];
  }
}

std::vector<State> NeighborhoodStructure::neighbors(const State& x) const {
  space_.validate(x);
  std::vector<State> out;
  switch (kind_) {
    case StructureKind::Grid:
      for_each_grid_candidate(x, [&](std::size_t, const State& y) {
        out.push_back(y);
        return true;
      });
      return out;
    case StructureKind::Explicit:
      for (std::uint64_t j : (*adjacency_)[space_.index(x)]) out.push_back(space_.state(j));
      return out;
    default: {
      const std::size_t k = degree(x);
      out.reserve(k);
      for (std::size_t i = 0; i < k; ++i) out.push_back(neighbor(x, i));
      return out;
    }
  }
}

std::size_t NeighborhoodStructure::degree(const State& x) const {
  space_.validate(x);
  switch (kind_) {
    case StructureKind::Chain: return space_.index(x) + 1 < space_.total_states() ? 1 : 0;
    case StructureKind::Cycle: return 1;
    case StructureKind::Star: return space_.index(x) == 0 ? 0 : 1;
    case StructureKind::Complete: return static_cast<std::size_t>(space_.total_states() - 1);
    case StructureKind::Explicit: return (*adjacency_)[space_.index(x)].size();
    case StructureKind::Grid: {
      std::size_t k = 0;
      for (std::size_t d = 0; d < x.size(); ++d) {
        const int n = space_.dim(d);
        if (boundary_ == Boundary::Wrap) {
          k += n == 2 ? 1 : 2;
        } else {
          k += (x[d] + 1 < n ? 1 : 0) + (x[d] > 0 ? 1 : 0);
        }
      }
      return k;
    }
  }
  return 0;
}

State NeighborhoodStructure::neighbor(const State& x, std::size_t i) const {
  const std::size_t k = degree(x);
  if (i >= k) {
    throw InvalidState("neighbor index " + std::to_string(i) + " out of range for state " + to_string(x) +
                       " with " + std::to_string(k) + " neighbors");
  }
  switch (kind_) {
    case StructureKind::Chain: return space_.state(space_.index(x) + 1);
    case StructureKind::Cycle: return space_.state((space_.index(x) + 1) % space_.total_states());
    case StructureKind::Star: return space_.state(0);
    case StructureKind::Complete: {
      const std::uint64_t self = space_.index(x);
      return space_.state(i < self ? i : i + 1);
    }
    case StructureKind::Explicit: return space_.state((*adjacency_)[space_.index(x)][i]);
    case StructureKind::Grid: {
      State out;
      std::size_t seen = 0;
      for_each_grid_candidate(x, [&](std::size_t, const State& y) {
        if (seen++ == i) {
          out = y;
          return false;
        }
        return true;
      });
      return out;
    }
  }
  return {};
}

std::vector<std::size_t> NeighborhoodStructure::slots(const State& x) const {
  if (kind_ == StructureKind::Grid) {
    space_.validate(x);
    std::vector<std::size_t> out;
    for_each_grid_candidate(x, [&](std::size_t slot, const State&) {
      out.push_back(slot);
      return true;
    });
    return out;
  }
  std::vector<std::size_t> out(degree(x));
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

std::optional<std::size_t> NeighborhoodStructure::position_of(const State& x, const State& y) const {
  space_.validate(x);
  if (!space_.contains(y)) return std::nullopt;
  switch (kind_) {
    case StructureKind::Chain:
    case StructureKind::Cycle:
    case StructureKind::Star:
      if (degree(x) == 1 && neighbor(x, 0) == y) return 0;
      return std::nullopt;
    case StructureKind::Complete: {
      const std::uint64_t a = space_.index(x);
      const std::uint64_t b = space_.index(y);
      if (a == b) return std::nullopt;
      return static_cast<std::size_t>(b < a ? b : b - 1);
    }
    case StructureKind::Explicit: {
      const auto& row = (*adjacency_)[space_.index(x)];
      const auto it = std::find(row.begin(), row.end(), space_.index(y));
      if (it == row.end()) return std::nullopt;
      return static_cast<std::size_t>(it - row.begin());
    }
    case StructureKind::Grid: {
      std::optional<std::size_t> found;
      std::size_t pos = 0;
      for_each_grid_candidate(x, [&](std::size_t, const State& c) {
        if (c == y) {
          found = pos;
          return false;
        }
        ++pos;
        return true;
      });
      return found;
    }
  }
  return std::nullopt;
}

NeighborhoodStructure build_structure(StructureKind kind, const DiscreteSpace& space, Boundary boundary) {
  if (kind == StructureKind::Explicit) {
    throw Error("build_structure: explicit structures need an edge list (use build_explicit_structure)");
  }
  NeighborhoodStructure s;
  s.kind_ = kind;
  s.boundary_ = boundary;
  s.space_ = space;
  if (kind == StructureKind::Grid) {
    s.max_degree_ = 2 * space.num_dims();
    s.symmetric_ = true;
    return s;
  }
  if (!space.enumerable()) {
    throw EnumerationLimit("build_structure: " + to_string(kind) + " needs an enumerable space");
  }
  const std::uint64_t n = space.total_states();
  switch (kind) {
    case StructureKind::Chain:
    case StructureKind::Star: s.max_degree_ = 1; s.symmetric_ = false; break;
    case StructureKind::Cycle: s.max_degree_ = 1; s.symmetric_ = n == 2; break;
    case StructureKind::Complete: s.max_degree_ = static_cast<std::size_t>(n - 1); s.symmetric_ = true; break;
    default: break;
  }
  return s;
}

NeighborhoodStructure build_explicit_structure(const DiscreteSpace& space, const std::vector<Edge>& edges) {
  if (!space.enumerable()) throw EnumerationLimit("explicit structure needs an enumerable space");
  auto adjacency = std::make_shared<std::vector<std::vector<std::uint64_t>>>(space.total_states());
  for (const auto& [src, dst] : edges) {
    if (!space.contains(src)) throw InvalidState("explicit edge source " + to_string(src) + " is not a valid state");
    if (!space.contains(dst)) throw InvalidState("explicit edge target " + to_string(dst) + " is not a valid state");
    if (src == dst) throw InvalidState("explicit edge " + to_string(src) + " -> itself is a self-loop");
    auto& row = (*adjacency)[space.index(src)];
    const std::uint64_t j = space.index(dst);
    if (std::find(row.begin(), row.end(), j) == row.end()) row.push_back(j);
  }
  NeighborhoodStructure s;
  s.kind_ = StructureKind::Explicit;
  s.space_ = space;
  s.symmetric_ = true;
  for (std::uint64_t a = 0; a < adjacency->size(); ++a) {
    s.max_degree_ = std::max(s.max_degree_, (*adjacency)[a].size());
    for (std::uint64_t b : (*adjacency)[a]) {
      const auto& back = (*adjacency)[b];
      if (std::find(back.begin(), back.end(), a) == back.end()) s.symmetric_ = false;
    }
  }
  s.adjacency_ = std::move(adjacency);
  return s;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

State parse_state(const std::string& text, std::size_t line_no) {
  State x;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      x.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": '" + item + "' is not an integer coordinate");
    }
  }
  if (x.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty state");
  return x;
}

}  // namespace

std::vector<Edge> parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto arrow = line.find("->");
    if (arrow == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected 'src -> dst'");
    edges.emplace_back(parse_state(trim(line.substr(0, arrow)), line_no),
                       parse_state(trim(line.substr(arrow + 2)), line_no));
  }
  return edges;
}

NeighborhoodStructure load_explicit_structure(const std::string& path, const DiscreteSpace& space) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open edge list '" + path + "'");
  return build_explicit_structure(space, parse_edge_list(in));
}

ReverseIndex ReverseIndex::tabulate(const NeighborhoodStructure& structure) {
  const DiscreteSpace& space = structure.space();
  if (!space.enumerable()) {
    throw EnumerationLimit("build_reverse_index: space exceeds the enumeration cap of " +
                           std::to_string(space.enumeration_cap()) + " states");
  }
  ReverseIndex index(structure);
  index.table_.resize(space.total_states());
  for (std::uint64_t a = 0; a < space.total_states(); ++a) {
    const State x = space.state(a);
    const auto nbrs = structure.neighbors(x);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      index.table_[space.index(nbrs[i])].emplace_back(a, static_cast<std::uint32_t>(i));
    }
  }
  return index;
}

ReverseIndex ReverseIndex::on_the_fly(const NeighborhoodStructure& structure) {
  if (!structure.symmetric()) {
    throw Error("on-the-fly reverse index needs a symmetric structure; " + to_string(structure.kind()) + " is not");
  }
  return ReverseIndex(structure);
}

std::vector<ReverseEntry> ReverseIndex::entries(const State& target) const {
  const DiscreteSpace& space = structure_.space();
  space.validate(target);
  std::vector<ReverseEntry> out;
  if (tabulated()) {
    for (const auto& [src, pos] : table_[space.index(target)]) out.push_back({space.state(src), pos});
    return out;
  }
  for (State& src : structure_.neighbors(target)) {
    const auto pos = structure_.position_of(src, target);
    out.push_back({std::move(src), *pos});
  }
  return out;
}

std::size_t ReverseIndex::count(const State& target) const {
  if (tabulated()) {
    structure_.space().validate(target);
    return table_[structure_.space().index(target)].size();
  }
  return structure_.degree(target);
}

ReverseIndex build_reverse_index(const NeighborhoodStructure& structure) { return ReverseIndex::tabulate(structure); }

namespace {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

bool is_weakly_connected(const NeighborhoodStructure& structure, const std::vector<State>& support) {
  if (support.empty()) throw Error("is_weakly_connected: empty support");
  std::unordered_map<State, std::size_t, StateHash> id;
  id.reserve(support.size());
  for (const State& x : support) {
    structure.space().validate(x);
    id.emplace(x, id.size());
  }
  DisjointSets sets(id.size());
  std::size_t components = id.size();
  for (const auto& [x, a] : id) {
    for (const State& y : structure.neighbors(x)) {
      const auto it = id.find(y);
      if (it != id.end() && sets.unite(a, it->second)) --components;
    }
  }
  return components == 1;
}

bool is_weakly_connected(const NeighborhoodStructure& structure) {
  return is_weakly_connected(structure, structure.space().enumerate());
}

}  // namespace csm

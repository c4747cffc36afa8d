#include "csm/exact.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "csm/error.hpp"
#include "csm/numeric.hpp"

namespace csm {

namespace {

constexpr double kMassTolerance = 1e-12;
constexpr double kClampWindow = 1e-9;

}  // namespace

TabularDistribution::TabularDistribution(DiscreteSpace space, std::vector<double> mass)
    : space_(std::move(space)), mass_(std::move(mass)) {
  if (mass_.size() != space_.total_states()) {
    throw Error("TabularDistribution: " + std::to_string(mass_.size()) + " masses for " +
                std::to_string(space_.total_states()) + " states");
  }
  double total = 0.0;
  strictly_positive_ = true;
  for (std::size_t i = 0; i < mass_.size(); ++i) {
    if (!(mass_[i] >= 0.0) || !std::isfinite(mass_[i])) {
      throw NumericError("TabularDistribution: mass of state " + std::to_string(i) + " is " +
                         std::to_string(mass_[i]));
    }
    if (mass_[i] == 0.0) strictly_positive_ = false;
    total += mass_[i];
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "TabularDistribution: masses sum to " << total;
    throw NumericError(os.str());
  }
}

TabularDistribution TabularDistribution::from_weights(DiscreteSpace space, std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw NumericError("from_weights: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw NumericError("from_weights: all weights are zero");
  for (double& w : weights) w /= total;
  return TabularDistribution(std::move(space), std::move(weights));
}

TabularDistribution TabularDistribution::from_log_weights(DiscreteSpace space, std::span<const double> log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw NumericError("from_log_weights: log-normalizer is not finite");
  std::vector<double> mass(log_weights.size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = std::exp(log_weights[i] - lse);
  // exp rounding can leave the sum a few ulps from 1
  return from_weights(std::move(space), std::move(mass));
}

TabularDistribution TabularDistribution::uniform(DiscreteSpace space) {
  const auto n = space.total_states();
  return from_weights(std::move(space), std::vector<double>(n, 1.0));
}

TabularDistribution TabularDistribution::empirical(DiscreteSpace space, const std::vector<State>& samples) {
  if (samples.empty()) throw Error("empirical: no samples");
  std::vector<double> counts(space.total_states(), 0.0);
  for (const State& x : samples) {
    space.validate(x);
    counts[space.index(x)] += 1.0;
  }
  return from_weights(std::move(space), std::move(counts));
}

double TabularDistribution::operator()(const State& x) const {
  space_.validate(x);
  return mass_[space_.index(x)];
}

double TabularDistribution::entropy() const {
  double h = 0.0;
  for (double m : mass_) {
    if (m > 0.0) h -= m * std::log(m);
  }
  return h;
}

std::vector<double> concrete_score_exact(const TabularDistribution& p, const NeighborhoodStructure& structure,
                                         const State& x) {
  if (!(p.space() == structure.space())) throw Error("concrete_score_exact: distribution and structure spaces differ");
  const double px = p(x);
  if (!(px > 0.0)) throw NumericError("concrete_score_exact: p" + to_string(x) + " = 0");
  std::vector<double> score;
  for (const State& y : structure.neighbors(x)) score.push_back(p(y) / px - 1.0);
  return score;
}

Reconstruction reconstruct_density(const ScoreFn& score_fn, const NeighborhoodStructure& structure,
                                   const std::vector<State>& support, std::optional<State> root) {
  const DiscreteSpace& space = structure.space();
  if (support.empty()) throw Error("reconstruct_density: empty support");
  const std::uint64_t n = space.total_states();

  std::vector<char> in_support(n, 0);
  for (const State& x : support) {
    space.validate(x);
    in_support[space.index(x)] = 1;
  }

  // Undirected adjacency with signed log-ratios log p(b) - log p(a).
  struct Arc {
    std::uint64_t to;
    double log_ratio;
  };
  std::unordered_map<std::uint64_t, std::vector<Arc>> arcs;
  std::size_t clamped = 0;
  for (std::uint64_t a = 0; a < n; ++a) {
    if (!in_support[a]) continue;
    const State x = space.state(a);
    const auto nbrs = structure.neighbors(x);
    if (nbrs.empty()) continue;
    const std::vector<double> score = score_fn(x);
    if (score.size() != nbrs.size()) {
      throw Error("reconstruct_density: score at " + to_string(x) + " has " + std::to_string(score.size()) +
                  " entries, expected " + std::to_string(nbrs.size()));
    }
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const std::uint64_t b = space.index(nbrs[i]);
      if (!in_support[b]) continue;
      double c = score[i];
      if (!std::isfinite(c)) throw NumericError("reconstruct_density: non-finite score at " + to_string(x));
      if (c <= -1.0 + kClampWindow) {
        if (c <= -1.0 - kClampWindow) {
          throw NumericError("reconstruct_density: score entry " + std::to_string(c) + " <= -1 at " + to_string(x));
        }
        c = -1.0 + kClampWindow;
        ++clamped;
      }
      const double lr = std::log1p(c);
      arcs[a].push_back({b, lr});
      arcs[b].push_back({a, -lr});
    }
  }

  std::uint64_t start = n;
  if (root) {
    space.validate(*root);
    start = space.index(*root);
    if (!in_support[start]) throw Error("reconstruct_density: root is outside the support");
  } else {
    for (std::uint64_t a = 0; a < n; ++a) {
      if (in_support[a]) {
        start = a;
        break;
      }
    }
  }

  const double unset = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> log_mass(n, -std::numeric_limits<double>::infinity());
  std::vector<double> visited_value(n, unset);
  std::deque<std::uint64_t> queue{start};
  visited_value[start] = 0.0;
  std::size_t reached = 1;
  double residual = 0.0;
  while (!queue.empty()) {
    const std::uint64_t a = queue.front();
    queue.pop_front();
    const auto it = arcs.find(a);
    if (it == arcs.end()) continue;
    for (const Arc& arc : it->second) {
      const double candidate = visited_value[a] + arc.log_ratio;
      if (std::isnan(visited_value[arc.to])) {
        visited_value[arc.to] = candidate;
        ++reached;
        queue.push_back(arc.to);
      } else {
        residual = std::max(residual, std::abs(visited_value[arc.to] - candidate));
      }
    }
  }
  if (reached != support.size()) {
    // support may repeat states; count distinct ones before blaming the graph
    std::size_t distinct = 0;
    for (char c : in_support) distinct += c;
    if (reached != distinct) {
      throw Disconnected("reconstruct_density: graph restricted to the support is disconnected (" +
                         std::to_string(reached) + " of " + std::to_string(distinct) + " states reachable)");
    }
  }
  for (std::uint64_t a = 0; a < n; ++a) {
    if (in_support[a]) log_mass[a] = visited_value[a];
  }
  return {TabularDistribution::from_log_weights(space, log_mass), residual, clamped};
}

Reconstruction reconstruct_density(const ScoreFn& score_fn, const NeighborhoodStructure& structure) {
  return reconstruct_density(score_fn, structure, structure.space().enumerate());
}

std::vector<double> scaled_score_limit(const DensityFn& density, std::span<const double> x, double delta) {
  if (!(delta > 0.0)) throw Error("scaled_score_limit: delta must be positive");
  const double px = density(x);
  if (!(px > 0.0)) throw NumericError("scaled_score_limit: density is not positive at x");
  std::vector<double> shifted(x.begin(), x.end());
  std::vector<double> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    shifted[d] = x[d] + delta;
    const double pd = density(shifted);
    if (!(pd > 0.0)) throw NumericError("scaled_score_limit: density is not positive at x + delta e_d");
    out[d] = (pd - px) / (delta * px);
    shifted[d] = x[d];
  }
  return out;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

Divergences kl_and_tv(const TabularDistribution& p, const TabularDistribution& q) {
  if (!(p.space() == q.space())) throw Error("kl_and_tv: distributions live on different spaces");
  Divergences out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p.at(i);
    const double b = q.at(i);
    if (a > 0.0) out.kl += b > 0.0 ? a * std::log(a / b) : std::numeric_limits<double>::infinity();
  }
  out.tv = total_variation(p.mass(), q.mass());
  return out;
}

void write_distribution_csv(const TabularDistribution& p, std::ostream& out) {
  const auto states = p.space().enumerate();
  char buf[64];
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (int v : states[i]) out << v << ',';
    std::snprintf(buf, sizeof buf, "%.17g", p.at(i));
    out << buf << '\n';
  }
}

TabularDistribution read_distribution_csv(std::istream& in, const DiscreteSpace& space) {
  std::vector<double> mass(space.total_states(), 0.0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != space.num_dims() + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(space.num_dims() + 1) +
                       " fields, found " + std::to_string(fields.size()));
    }
    State x(space.num_dims());
    try {
      for (std::size_t d = 0; d < x.size(); ++d) x[d] = std::stoi(fields[d]);
      if (!space.contains(x)) throw InvalidState(to_string(x));
      mass[space.index(x)] = std::stod(fields.back());
    } catch (const InvalidState&) {
      throw ParseError("line " + std::to_string(line_no) + ": state " + to_string(x) + " is outside the space");
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return TabularDistribution(space, std::move(mass));
}

}  // namespace csm

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csm/graphs.hpp"
#include "csm/space.hpp"

namespace csm {

/// Fully enumerated probability mass function over an enumerable space.
class TabularDistribution {
 public:
  /// Masses must be non-negative and sum to 1 within 1e-12.
  TabularDistribution(DiscreteSpace space, std::vector<double> mass);

  /// Normalizes non-negative weights.
  static TabularDistribution from_weights(DiscreteSpace space, std::vector<double> weights);
  /// Normalizes exp(log_weights) with log-sum-exp; -inf entries get zero mass.
  static TabularDistribution from_log_weights(DiscreteSpace space, std::span<const double> log_weights);
  static TabularDistribution uniform(DiscreteSpace space);
  /// Normalized histogram of the samples.
  static TabularDistribution empirical(DiscreteSpace space, const std::vector<State>& samples);

  const DiscreteSpace& space() const { return space_; }
  std::span<const double> mass() const { return mass_; }
  std::size_t size() const { return mass_.size(); }
  double at(std::uint64_t index) const { return mass_[index]; }
  double operator()(const State& x) const;
  bool strictly_positive() const { return strictly_positive_; }
  /// Shannon entropy in nats.
  double entropy() const;

 private:
  DiscreteSpace space_;
  std::vector<double> mass_;
  bool strictly_positive_ = false;
};

/// Entry i is p(N(x)_i) / p(x) - 1. Throws NumericError when p(x) = 0.
std::vector<double> concrete_score_exact(const TabularDistribution& p, const NeighborhoodStructure& structure,
                                         const State& x);

using ScoreFn = std::function<std::vector<double>(const State&)>;

struct Reconstruction {
  TabularDistribution distribution;
  /// Largest |log-ratio mismatch| over edges left out of the spanning tree;
  /// zero (to rounding) when the scores come from a distribution.
  double max_cycle_residual = 0.0;
  /// Score entries within 1e-9 of -1 that were clamped to -1 + 1e-9.
  std::size_t clamped_entries = 0;
};

/// Rebuilds the distribution whose Concrete scores are `score_fn` on the
/// support. Log-masses are accumulated along a BFS spanning tree of the
/// undirected graph (an edge walked backwards contributes the negated
/// log-ratio) and normalized with log-sum-exp. States outside the support
/// get zero mass. The root defaults to the lowest-index support state.
///
/// Throws Disconnected when the support graph is not weakly connected and
/// NumericError for a score entry at or below -1 - 1e-9.
Reconstruction reconstruct_density(const ScoreFn& score_fn, const NeighborhoodStructure& structure,
                                   const std::vector<State>& support, std::optional<State> root = std::nullopt);
/// Support = the whole (enumerable) space.
Reconstruction reconstruct_density(const ScoreFn& score_fn, const NeighborhoodStructure& structure);

using DensityFn = std::function<double(std::span<const double>)>;

/// [(p(x + delta e_d) - p(x)) / (delta p(x))]_d, the Concrete score of the
/// forward-step structure scaled by 1/delta. It tends to grad log p(x) as
/// delta -> 0 with O(delta) error.
std::vector<double> scaled_score_limit(const DensityFn& density, std::span<const double> x, double delta);

struct Divergences {
  double kl = 0.0;  ///< sum p log(p/q); +inf when q = 0 somewhere p > 0
  double tv = 0.0;  ///< 0.5 sum |p - q|
};

Divergences kl_and_tv(const TabularDistribution& p, const TabularDistribution& q);
double total_variation(std::span<const double> p, std::span<const double> q);

/// One line per state: `i_0,...,i_{D-1},mass`, masses printed round-trip exact.
void write_distribution_csv(const TabularDistribution& p, std::ostream& out);
/// Reads the format above. States not listed get zero mass; every listed
/// state must be valid in `space`.
TabularDistribution read_distribution_csv(std::istream& in, const DiscreteSpace& space);

}  // namespace csm

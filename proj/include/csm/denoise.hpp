#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "csm/exact.hpp"
#include "csm/models.hpp"
#include "csm/rng.hpp"
#include "csm/space.hpp"

namespace csm {

/// Largest dimension handled here: the posterior enumerates 2^D corners.
inline constexpr std::size_t kMaxDenoiseDims = 12;

/// ratio(y, x) = p(y) / p(x) for integer states of a space; ratio(x, x) is 1
/// for any state with mass.
using RatioFn = std::function<double(const State& y, const State& x)>;

/// prod_d max(0, 1 - |u_d|).
double triangular_pdf(std::span<const double> u);

/// x + t with t_d drawn independently from the unit triangular density by
/// inverse-CDF sampling.
std::vector<double> perturb(const State& x, Rng& rng);

/// Density of the perturbed distribution, sum_y p(y) T(x~ - y).
double perturbed_density(const TabularDistribution& p, std::span<const double> noisy);

struct CornerPosterior {
  std::vector<State> corners;
  std::vector<double> weights;  ///< sums to 1
};

/// p(y | x~) over the corners y of the unit cell holding x~, restricted to
/// states of `space`. Weights are ratio(y, ref) * prod_d tent_d(y). Integer
/// coordinates take the cell's lower corner with tent weight 1.
CornerPosterior posterior_weights(std::span<const double> noisy, const RatioFn& ratio, const DiscreteSpace& space);

/// grad log p~(x~) from corner ratios. In 1-D this is
/// (r - 1) / (r (x~ - floor x~) + (floor x~ + 1 - x~)) with r = p(floor+1)/p(floor);
/// on an integer coordinate it is the right derivative.
std::vector<double> recover_stein_score(std::span<const double> noisy, const RatioFn& ratio,
                                        const DiscreteSpace& space);

/// A corner drawn from posterior_weights.
State denoise_sample(std::span<const double> noisy, const RatioFn& ratio, const DiscreteSpace& space, Rng& rng);

/// Ratios of a tabular distribution; +inf when only p(x) is zero and 0 when
/// both are. The corner routines above re-base onto a corner with mass.
RatioFn ratio_fn_from_distribution(TabularDistribution p);

/// Ratios from a score model: Concrete scores are chained along a spanning
/// tree of its (weakly connected) structure once, then looked up.
RatioFn ratio_fn_from_scores(const ScoreModel& model);

}  // namespace csm

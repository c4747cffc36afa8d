#include "csm/denoise.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "csm/error.hpp"

namespace csm {

namespace {

struct Cell {
  std::vector<int> lower;
  std::vector<double> frac;  // x~ - lower, in [0, 1)
};

Cell locate(std::span<const double> noisy, const DiscreteSpace& space) {
  if (noisy.size() != space.num_dims()) throw Error("denoise: point dimension does not match the space");
  if (noisy.size() > kMaxDenoiseDims) {
    throw Error("denoise: at most " + std::to_string(kMaxDenoiseDims) + " dimensions are supported");
  }
  Cell c;
  for (double v : noisy) {
    if (!std::isfinite(v)) throw NumericError("denoise: non-finite coordinate");
    const double f = std::floor(v);
    c.lower.push_back(static_cast<int>(f));
    c.frac.push_back(v - f);
  }
  return c;
}

// Visits every in-space corner: fn(corner, mask) with bit d set for upper.
template <class Fn>
void for_each_corner(const Cell& cell, const DiscreteSpace& space, Fn&& fn) {
  const std::size_t D = cell.lower.size();
  State y(D);
  for (std::uint32_t mask = 0; mask < (1u << D); ++mask) {
    bool inside = true;
    for (std::size_t d = 0; d < D; ++d) {
      y[d] = cell.lower[d] + static_cast<int>((mask >> d) & 1u);
      inside = inside && y[d] >= 0 && y[d] < space.dim(d);
    }
    if (inside) fn(y, mask);
  }
}

double tent(const Cell& cell, std::size_t d, std::uint32_t mask) {
  return ((mask >> d) & 1u) ? cell.frac[d] : 1.0 - cell.frac[d];
}

// Ratios of `corners` relative to one of them. The first corner is tried as
// the reference; if some corner is infinitely more likely (the reference has
// zero mass) that corner becomes the reference instead.
std::vector<double> relative_ratios(const std::vector<State>& corners, const RatioFn& ratio_fn) {
  std::size_t ref = 0;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> r(corners.size());
    std::size_t heavier = ref;
    for (std::size_t k = 0; k < corners.size() && heavier == ref; ++k) {
      r[k] = ratio_fn(corners[k], corners[ref]);
      if (std::isinf(r[k]) && r[k] > 0.0) {
        heavier = k;
      } else if (!(r[k] >= 0.0) || !std::isfinite(r[k])) {
        throw NumericError("denoise: invalid density ratio");
      }
    }
    if (heavier == ref) return r;
    ref = heavier;
  }
  throw NumericError("denoise: inconsistent density ratios");
}

struct CornerRatios {
  std::vector<State> corners;
  std::vector<std::uint32_t> masks;
  std::vector<double> ratio;
};

CornerRatios corner_ratios(const Cell& cell, const DiscreteSpace& space, const RatioFn& ratio_fn) {
  CornerRatios out;
  for_each_corner(cell, space, [&](const State& y, std::uint32_t mask) {
    out.corners.push_back(y);
    out.masks.push_back(mask);
  });
  if (out.corners.empty()) throw NumericError("denoise: the point lies outside every cell of the space");
  out.ratio = relative_ratios(out.corners, ratio_fn);
  return out;
}

}  // namespace

double triangular_pdf(std::span<const double> u) {
  double v = 1.0;
  for (double x : u) v *= std::max(0.0, 1.0 - std::abs(x));
  return v;
}

std::vector<double> perturb(const State& x, Rng& rng) {
  std::vector<double> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double u = rng.uniform();
    const double t = u < 0.5 ? -1.0 + std::sqrt(2.0 * u) : 1.0 - std::sqrt(2.0 * (1.0 - u));
    out[d] = x[d] + t;
  }
  return out;
}

double perturbed_density(const TabularDistribution& p, std::span<const double> noisy) {
  const Cell cell = locate(noisy, p.space());
  double total = 0.0;
  for_each_corner(cell, p.space(), [&](const State& y, std::uint32_t) {
    std::vector<double> u(y.size());
    for (std::size_t d = 0; d < y.size(); ++d) u[d] = noisy[d] - y[d];
    total += p(y) * triangular_pdf(u);
  });
  return total;
}

CornerPosterior posterior_weights(std::span<const double> noisy, const RatioFn& ratio, const DiscreteSpace& space) {
  const Cell cell = locate(noisy, space);
  const std::size_t D = cell.lower.size();
  // Corners with zero tent weight are dropped before any ratio is queried.
  CornerPosterior post;
  std::vector<std::uint32_t> masks;
  for_each_corner(cell, space, [&](const State& y, std::uint32_t mask) {
    double t = 1.0;
    for (std::size_t d = 0; d < D; ++d) t *= tent(cell, d, mask);
    if (t > 0.0) {
      post.corners.push_back(y);
      masks.push_back(mask);
      post.weights.push_back(t);
    }
  });
  if (post.corners.empty()) throw NumericError("denoise: no corner of the cell carries weight");
  const std::vector<double> r = relative_ratios(post.corners, ratio);
  double total = 0.0;
  for (std::size_t k = 0; k < post.corners.size(); ++k) {
    post.weights[k] *= r[k];
    total += post.weights[k];
  }
  if (!(total > 0.0)) throw NumericError("denoise: every corner has zero posterior weight");
  for (double& w : post.weights) w /= total;
  return post;
}

std::vector<double> recover_stein_score(std::span<const double> noisy, const RatioFn& ratio,
                                        const DiscreteSpace& space) {
  const Cell cell = locate(noisy, space);
  const std::size_t D = cell.lower.size();
  const CornerRatios cr = corner_ratios(cell, space, ratio);
  // p~ ~ sum_y r_y prod_e tent_e(y); d/dx_d of tent_d is -1 (lower) or +1 (upper).
  double density = 0.0;
  std::vector<double> grad(D, 0.0);
  for (std::size_t k = 0; k < cr.corners.size(); ++k) {
    const std::uint32_t mask = cr.masks[k];
    double full = cr.ratio[k];
    for (std::size_t e = 0; e < D; ++e) full *= tent(cell, e, mask);
    density += full;
    for (std::size_t d = 0; d < D; ++d) {
      double partial = cr.ratio[k] * (((mask >> d) & 1u) ? 1.0 : -1.0);
      for (std::size_t e = 0; e < D; ++e) {
        if (e != d) partial *= tent(cell, e, mask);
      }
      grad[d] += partial;
    }
  }
  if (!(density > 0.0)) throw NumericError("denoise: perturbed density vanishes at the query point");
  for (double& g : grad) g /= density;
  return grad;
}

State denoise_sample(std::span<const double> noisy, const RatioFn& ratio, const DiscreteSpace& space, Rng& rng) {
  const CornerPosterior post = posterior_weights(noisy, ratio, space);
  if (post.corners.size() == 1) return post.corners.front();
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < post.corners.size(); ++k) {
    acc += post.weights[k];
    if (u < acc) return post.corners[k];
  }
  return post.corners.back();
}

RatioFn ratio_fn_from_distribution(TabularDistribution p) {
  auto shared = std::make_shared<const TabularDistribution>(std::move(p));
  return [shared](const State& y, const State& x) {
    const double px = (*shared)(x);
    const double py = (*shared)(y);
    if (px <= 0.0) return py > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return py / px;
  };
}

RatioFn ratio_fn_from_scores(const ScoreModel& model) {
  const Reconstruction rec =
      reconstruct_density([&model](const State& x) { return model.score(x); }, model.structure());
  return ratio_fn_from_distribution(rec.distribution);
}

}  // namespace csm

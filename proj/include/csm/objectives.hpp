#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csm/autodiff.hpp"
#include "csm/exact.hpp"
#include "csm/graphs.hpp"
#include "csm/models.hpp"
#include "csm/rng.hpp"
#include "csm/space.hpp"

namespace csm {

struct ObjectiveMeta {
  std::size_t states_visited = 0;
  std::size_t neighbors_sampled = 0;
  /// Batch states dropped because they had no neighbor / no reverse entry.
  std::size_t skipped = 0;
  /// Conditionals raised to the clamp floor.
  std::size_t clamped = 0;

  ObjectiveMeta& operator+=(const ObjectiveMeta& o);
};

/// A loss value with its gradient w.r.t. the model's flat parameters.
struct ObjectiveValue {
  double value = 0.0;
  std::vector<double> grad;
  ObjectiveMeta meta;
};

/// Per-dimension categorical corruption: keep the value with probability w,
/// otherwise move to each other category with probability (1-w)/(n_d-1).
class NoiseKernel {
 public:
  NoiseKernel(DiscreteSpace space, double w);

  const DiscreteSpace& space() const { return space_; }
  double stay() const { return w_; }
  double prob(std::size_t d, int from, int to) const;
  /// Full row q(. | from) for dimension d.
  std::vector<double> row(std::size_t d, int from) const;
  /// q(to | from) over all dimensions.
  double joint(const State& from, const State& to) const;
  State sample(const State& x, Rng& rng) const;

 private:
  DiscreteSpace space_;
  double w_;
};

enum class RatioVariant { Fixed, Original };

// Graph-recording forms; each returns a scalar on `tape` (batch mean where
// a batch is involved) and adds its counters to `meta`.
namespace record {

ad::Var csm_loss_exact(ad::Tape& tape, const ScoreModel& model, const TabularDistribution& p, ObjectiveMeta& meta);
ad::Var jcsm_exact(ad::Tape& tape, const ScoreModel& model, const TabularDistribution& p, ObjectiveMeta& meta);
ad::Var estimate_j1(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch, Rng& rng,
                    ObjectiveMeta& meta);
ad::Var estimate_j2(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch,
                    const ReverseIndex& reverse, Rng& rng, ObjectiveMeta& meta);
ad::Var estimate_j2_structured(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch, Rng& rng,
                               ObjectiveMeta& meta);
ad::Var dcsm_loss(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch, const NoiseKernel& kernel,
                  Rng& rng, ObjectiveMeta& meta);
ad::Var dcsm_loss_exact(ad::Tape& tape, const ScoreModel& model, const TabularDistribution& p,
                        const NoiseKernel& kernel, ObjectiveMeta& meta);
ad::Var ratio_matching_loss(ad::Tape& tape, const DensityModel& model, std::span<const State> batch,
                            RatioVariant variant, ObjectiveMeta& meta);
ad::Var marginalization_loss(ad::Tape& tape, const DensityModel& model, std::span<const State> batch,
                             RatioVariant variant, ObjectiveMeta& meta);
ad::Var nll_loss(ad::Tape& tape, const DensityModel& model, std::span<const State> batch, ObjectiveMeta& meta);

}  // namespace record

/// sum_x p(x) ||c_theta(x) - c_p(x)||^2 on the model's structure.
ObjectiveValue csm_loss_exact(const ScoreModel& model, const TabularDistribution& p);

/// J1 - J2 with J1 = sum_x sum_i p(x)(c_i^2 + 2 c_i) and
/// J2 = sum_x sum_i 2 p(N(x)_i) c_i, fully enumerated. Differs from
/// csm_loss_exact by a parameter-independent constant.
ObjectiveValue jcsm_exact(const ScoreModel& model, const TabularDistribution& p);

/// One uniformly drawn neighbor per state, weighted by |N(x)|; unbiased for
/// J1 under the batch distribution. States with no neighbor are skipped.
ObjectiveValue estimate_j1(const ScoreModel& model, std::span<const State> batch, Rng& rng);

/// One uniformly drawn reverse pair (x, i) per target x', weighted by
/// 2 |N^{-1}(x')|; unbiased for J2. Targets without sources are skipped.
ObjectiveValue estimate_j2(const ScoreModel& model, std::span<const State> batch, const ReverseIndex& reverse,
                           Rng& rng);

/// J2 for Chain/Cycle/Grid without a reverse index. Chain and Cycle use
/// 2 c(pred(x))_0 (zero for the first state of a chain); Grid draws one
/// dimension uniformly, sums the in-edges along it and scales by D.
ObjectiveValue estimate_j2_structured(const ScoreModel& model, std::span<const State> batch, Rng& rng);

/// Denoising loss: corrupt each clean x once and regress c_theta(x~) on the
/// exact Concrete score of q(. | x) at x~.
ObjectiveValue dcsm_loss(const ScoreModel& model, std::span<const State> batch, const NoiseKernel& kernel,
                         Rng& rng);

/// The expectation of dcsm_loss over x ~ p and every corruption, enumerated.
ObjectiveValue dcsm_loss_exact(const ScoreModel& model, const TabularDistribution& p, const NoiseKernel& kernel);

ObjectiveValue ratio_matching_loss(const DensityModel& model, std::span<const State> batch, RatioVariant variant);

/// Conditionals are floored at kConditionalFloor; hits are counted in
/// meta.clamped.
ObjectiveValue marginalization_loss(const DensityModel& model, std::span<const State> batch, RatioVariant variant);

/// -mean log q(x), normalized through log_partition().
ObjectiveValue nll_loss(const DensityModel& model, std::span<const State> batch);

inline constexpr double kConditionalFloor = 1e-6;

/// Score of the kernel conditional at x~: entry i is
/// q(N(x~)_i | x) / q(x~ | x) - 1.
std::vector<double> kernel_conditional_score(const NoiseKernel& kernel, const NeighborhoodStructure& structure,
                                             const State& clean, const State& noisy);

enum class ObjectiveKind {
  CsmExact,
  CsmMc,
  CsmStructured,
  Dcsm,
  RatioFixed,
  RatioOriginal,
  MarginalFixed,
  MarginalOriginal,
  Nll,
};

ObjectiveKind parse_objective(std::string_view name);
std::string to_string(ObjectiveKind kind);
/// True for objectives that need a DensityModel rather than any score model.
bool needs_density(ObjectiveKind kind);

}  // namespace csm

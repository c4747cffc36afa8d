#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "csm/data.hpp"
#include "csm/exact.hpp"
#include "csm/graphs.hpp"
#include "csm/models.hpp"
#include "csm/objectives.hpp"
#include "csm/optim.hpp"

namespace csm {

struct TrainOptions {
  ObjectiveKind objective = ObjectiveKind::CsmMc;
  AdamConfig adam;
  std::size_t batch_size = 128;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  /// Log cadence; the last iteration is always logged.
  std::size_t log_every = 100;
  /// Stay probability of the corruption kernel used by dcsm.
  double noise_w = 0.9;
  /// csm_exact fits this distribution instead of the data histogram.
  std::optional<TabularDistribution> exact_target;
};

struct TrainLogRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  /// TV to the dataset's ground truth; NaN when either side is unavailable.
  double tv = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  ObjectiveMeta meta;
  double final_objective = 0.0;
  double final_tv = 0.0;
};

/// Everything an objective evaluation may need besides the batch.
class ObjectiveContext {
 public:
  ObjectiveContext(ObjectiveKind kind, const NeighborhoodStructure& structure, const Dataset& data,
                   double noise_w = 0.9, std::optional<TabularDistribution> exact_target = std::nullopt);

  ObjectiveKind kind() const { return kind_; }
  const NeighborhoodStructure& structure() const { return structure_; }

  /// Evaluates the objective for `model` on `batch` (ignored by csm_exact,
  /// which enumerates). Density models are turned into implied scores on
  /// the context's structure for score objectives.
  ObjectiveValue evaluate(AnyModel& model, std::span<const State> batch, Rng& rng) const;

 private:
  ObjectiveKind kind_;
  NeighborhoodStructure structure_;
  std::optional<TabularDistribution> target_;
  std::optional<ReverseIndex> reverse_;
  std::optional<NoiseKernel> kernel_;
};

/// The normalized distribution a model represents, when it can be
/// enumerated: softmax of a logit table, exp(log q) of a masked AR model on
/// an enumerable space, or the reconstruction of a score network's scores.
std::optional<TabularDistribution> model_distribution(const AnyModel& model);

/// Adam on minibatches drawn with Rng(seed, 1); objective randomness uses
/// Rng(seed, 2). Throws NumericError naming the iteration when the loss
/// becomes non-finite.
TrainResult train_model(AnyModel& model, const NeighborhoodStructure& structure, const Dataset& data,
                        const TrainOptions& options,
                        const std::function<void(const TrainLogRow&)>& on_log = {});

}  // namespace csm

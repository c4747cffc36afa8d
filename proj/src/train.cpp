#include "csm/train.hpp"

#include <cmath>
#include <limits>

#include "csm/error.hpp"

namespace csm {

namespace {

constexpr std::uint64_t kMaxEnumeratedDims = 20;

bool same_structure(const NeighborhoodStructure& a, const NeighborhoodStructure& b) {
  return a.kind() == b.kind() && a.boundary() == b.boundary() && a.space() == b.space();
}

}  // namespace

ObjectiveContext::ObjectiveContext(ObjectiveKind kind, const NeighborhoodStructure& structure, const Dataset& data,
                                   double noise_w, std::optional<TabularDistribution> exact_target)
    : kind_(kind), structure_(structure) {
  if (!(data.space == structure.space())) throw Error("objective: dataset and structure spaces differ");
  switch (kind) {
    case ObjectiveKind::CsmExact:
      target_ = exact_target ? std::move(exact_target) : TabularDistribution::empirical(data.space, data.samples);
      break;
    case ObjectiveKind::CsmMc:
      reverse_ = structure.space().enumerable() ? ReverseIndex::tabulate(structure)
                                                : ReverseIndex::on_the_fly(structure);
      break;
    case ObjectiveKind::Dcsm:
      kernel_ = NoiseKernel(structure.space(), noise_w);
      break;
    default:
      break;
  }
}

ObjectiveValue ObjectiveContext::evaluate(AnyModel& model, std::span<const State> batch, Rng& rng) const {
  if (needs_density(kind_)) {
    const DensityModel* density = as_density(model);
    if (!density) throw Error("objective " + to_string(kind_) + " needs a density model, got " + model_kind(model));
    switch (kind_) {
      case ObjectiveKind::RatioFixed:
        return ratio_matching_loss(*density, batch, RatioVariant::Fixed);
      case ObjectiveKind::RatioOriginal:
        return ratio_matching_loss(*density, batch, RatioVariant::Original);
      case ObjectiveKind::MarginalFixed:
        return marginalization_loss(*density, batch, RatioVariant::Fixed);
      case ObjectiveKind::MarginalOriginal:
        return marginalization_loss(*density, batch, RatioVariant::Original);
      default:
        return nll_loss(*density, batch);
    }
  }

  std::optional<ImpliedScoreModel> implied;
  const ScoreModel* score = nullptr;
  if (DensityModel* density = as_density(model)) {
    implied.emplace(*density, structure_);
    score = &*implied;
  } else {
    const auto& net = std::get<ScoreNetModel>(model);
    if (!same_structure(net.structure(), structure_)) {
      throw Error("score network was built for a different neighborhood structure");
    }
    score = &net;
  }

  auto combine = [&](const std::function<ad::Var(ad::Tape&, ObjectiveMeta&)>& build) {
    ObjectiveValue out;
    ad::Tape tape(score->parameters());
    ad::Var loss = build(tape, out.meta);
    tape.backward(loss);
    out.value = loss.value();
    out.grad.assign(tape.param_grad().begin(), tape.param_grad().end());
    if (!std::isfinite(out.value)) throw NumericError("objective: non-finite value");
    return out;
  };

  switch (kind_) {
    case ObjectiveKind::CsmExact:
      return jcsm_exact(*score, *target_);
    case ObjectiveKind::CsmMc:
      return combine([&](ad::Tape& t, ObjectiveMeta& m) {
        ad::Var j1 = record::estimate_j1(t, *score, batch, rng, m);
        return j1 - record::estimate_j2(t, *score, batch, *reverse_, rng, m);
      });
    case ObjectiveKind::CsmStructured:
      return combine([&](ad::Tape& t, ObjectiveMeta& m) {
        ad::Var j1 = record::estimate_j1(t, *score, batch, rng, m);
        return j1 - record::estimate_j2_structured(t, *score, batch, rng, m);
      });
    case ObjectiveKind::Dcsm:
      return dcsm_loss(*score, batch, *kernel_, rng);
    default:
      throw Error("objective: unhandled kind " + to_string(kind_));
  }
}

std::optional<TabularDistribution> model_distribution(const AnyModel& model) {
  if (const auto* table = std::get_if<LogitTableModel>(&model)) return table->distribution();
  if (const auto* made = std::get_if<MaskedARModel>(&model)) {
    if (made->space().num_dims() > kMaxEnumeratedDims) return std::nullopt;
    std::vector<double> lq;
    for (const State& x : made->space().enumerate()) lq.push_back(made->log_q(x));
    return TabularDistribution::from_log_weights(made->space(), lq);
  }
  const auto& net = std::get<ScoreNetModel>(model);
  if (!net.structure().space().enumerable() || !is_weakly_connected(net.structure())) return std::nullopt;
  try {
    return reconstruct_density([&net](const State& x) { return net.score(x); }, net.structure()).distribution;
  } catch (const NumericError&) {
    return std::nullopt;  // scores at or below -1 describe no distribution
  }
}

TrainResult train_model(AnyModel& model, const NeighborhoodStructure& structure, const Dataset& data,
                        const TrainOptions& options, const std::function<void(const TrainLogRow&)>& on_log) {
  if (options.batch_size == 0) throw Error("train: batch size must be positive");
  if (options.log_every == 0) throw Error("train: log_every must be positive");
  ObjectiveContext context(options.objective, structure, data, options.noise_w, options.exact_target);
  std::vector<double>& params = model_parameters(model);
  Adam adam(params.size(), options.adam);
  Rng batch_rng(options.seed, 1);
  Rng objective_rng(options.seed, 2);
  TrainResult result;

  auto current_tv = [&]() {
    if (!data.truth) return std::numeric_limits<double>::quiet_NaN();
    const auto q = model_distribution(model);
    if (!q || !(q->space() == data.truth->space())) return std::numeric_limits<double>::quiet_NaN();
    return total_variation(data.truth->mass(), q->mass());
  };

  for (std::size_t it = 1; it <= options.iterations; ++it) {
    std::vector<State> batch;
    if (options.objective != ObjectiveKind::CsmExact) batch = sample_batch(data, options.batch_size, batch_rng);
    ObjectiveValue v;
    try {
      v = context.evaluate(model, batch, objective_rng);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(it) + ": " + e.what());
    }
    for (double g : v.grad) {
      if (!std::isfinite(g)) throw NumericError("iteration " + std::to_string(it) + ": non-finite gradient");
    }
    result.meta += v.meta;
    adam.step(params, v.grad);
    result.final_objective = v.value;
    if (it % options.log_every == 0 || it == options.iterations) {
      TrainLogRow row{it, v.value, current_tv()};
      result.log.push_back(row);
      if (on_log) on_log(row);
    }
  }
  result.final_tv = current_tv();
  return result;
}

}  // namespace csm

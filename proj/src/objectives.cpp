#include "csm/objectives.hpp"

#include <cmath>

#include "csm/error.hpp"

namespace csm {

ObjectiveMeta& ObjectiveMeta::operator+=(const ObjectiveMeta& o) {
  states_visited += o.states_visited;
  neighbors_sampled += o.neighbors_sampled;
  skipped += o.skipped;
  clamped += o.clamped;
  return *this;
}

// ---------------------------------------------------------------- kernel

NoiseKernel::NoiseKernel(DiscreteSpace space, double w) : space_(std::move(space)), w_(w) {
  if (!(w > 0.0 && w < 1.0)) throw Error("noise kernel: stay probability must lie in (0, 1)");
}

double NoiseKernel::prob(std::size_t d, int from, int to) const {
  if (from == to) return w_;
  return (1.0 - w_) / static_cast<double>(space_.dim(d) - 1);
}

std::vector<double> NoiseKernel::row(std::size_t d, int from) const {
  std::vector<double> r(space_.dim(d));
  for (int v = 0; v < space_.dim(d); ++v) r[v] = prob(d, from, v);
  return r;
}

double NoiseKernel::joint(const State& from, const State& to) const {
  double q = 1.0;
  for (std::size_t d = 0; d < from.size(); ++d) q *= prob(d, from[d], to[d]);
  return q;
}

State NoiseKernel::sample(const State& x, Rng& rng) const {
  space_.validate(x);
  State out = x;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (rng.uniform() < w_) continue;
    // uniform over the n_d - 1 other values
    int v = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(space_.dim(d) - 1)));
    if (v >= x[d]) ++v;
    out[d] = v;
  }
  return out;
}

std::vector<double> kernel_conditional_score(const NoiseKernel& kernel, const NeighborhoodStructure& structure,
                                             const State& clean, const State& noisy) {
  std::vector<double> out;
  for (const State& n : structure.neighbors(noisy)) {
    double ratio = 1.0;
    for (std::size_t d = 0; d < n.size(); ++d) {
      if (n[d] == noisy[d]) continue;
      const double den = kernel.prob(d, clean[d], noisy[d]);
      if (den <= 0.0) throw NumericError("noise kernel assigns zero probability to a corrupted state");
      ratio *= kernel.prob(d, clean[d], n[d]) / den;
    }
    out.push_back(ratio - 1.0);
  }
  return out;
}

// ---------------------------------------------------------------- recording forms

namespace record {

namespace {

ad::Var batch_mean(ad::Tape& tape, const std::vector<ad::Var>& terms, std::size_t batch_size) {
  if (batch_size == 0) throw Error("objective: empty batch");
  if (terms.empty()) return tape.scalar(0.0);
  return ad::add_all(terms) / static_cast<double>(batch_size);
}

ad::Var total(ad::Tape& tape, const std::vector<ad::Var>& terms) {
  return terms.empty() ? tape.scalar(0.0) : ad::add_all(terms);
}

}  // namespace

ad::Var csm_loss_exact(ad::Tape& tape, const ScoreModel& model, const TabularDistribution& p, ObjectiveMeta& meta) {
  const auto& structure = model.structure();
  if (!(p.space() == structure.space())) throw Error("csm_loss_exact: distribution and model spaces differ");
  if (!p.strictly_positive()) throw Error("csm_loss_exact: the data distribution must be strictly positive");
  std::vector<ad::Var> terms;
  for (const State& x : p.space().enumerate()) {
    ++meta.states_visited;
    if (structure.degree(x) == 0) continue;
    const auto target = concrete_score_exact(p, structure, x);
    meta.neighbors_sampled += target.size();
    ad::Var diff = model.score(tape, x) - tape.constant(target);
    terms.push_back(p(x) * ad::sum(ad::square(diff)));
  }
  return total(tape, terms);
}

ad::Var jcsm_exact(ad::Tape& tape, const ScoreModel& model, const TabularDistribution& p, ObjectiveMeta& meta) {
  const auto& structure = model.structure();
  if (!(p.space() == structure.space())) throw Error("jcsm_exact: distribution and model spaces differ");
  std::vector<ad::Var> terms;
  for (const State& x : p.space().enumerate()) {
    ++meta.states_visited;
    const auto nbrs = structure.neighbors(x);
    if (nbrs.empty()) continue;
    const double px = p(x);
    // p(x)(c^2 + 2c) - 2 p(n_i) c  ==  c * (p(x) c + 2 p(x) - 2 p(n_i))
    std::vector<double> a(nbrs.size());
    bool any = px > 0.0;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const double pn = p(nbrs[i]);
      a[i] = 2.0 * px - 2.0 * pn;
      any = any || pn > 0.0;
    }
    if (!any) continue;
    meta.neighbors_sampled += nbrs.size();
    ad::Var c = model.score(tape, x);
    terms.push_back(ad::sum(c * (px * c + tape.constant(std::move(a)))));
  }
  return total(tape, terms);
}

ad::Var estimate_j1(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch, Rng& rng,
                    ObjectiveMeta& meta) {
  const auto& structure = model.structure();
  std::vector<ad::Var> terms;
  for (const State& x : batch) {
    ++meta.states_visited;
    const std::size_t deg = structure.degree(x);
    if (deg == 0) {
      ++meta.skipped;
      continue;
    }
    const std::size_t i = rng.uniform_index(deg);
    ++meta.neighbors_sampled;
    ad::Var c = model.score_entry(tape, x, i);
    terms.push_back(static_cast<double>(deg) * (c * (c + 2.0)));
  }
  return batch_mean(tape, terms, batch.size());
}

ad::Var estimate_j2(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch,
                    const ReverseIndex& reverse, Rng& rng, ObjectiveMeta& meta) {
  if (!(reverse.structure().space() == model.structure().space())) {
    throw Error("estimate_j2: reverse index was built for a different space");
  }
  std::vector<ad::Var> terms;
  for (const State& target : batch) {
    ++meta.states_visited;
    const auto entries = reverse.entries(target);
    if (entries.empty()) {
      ++meta.skipped;
      continue;
    }
    const ReverseEntry& e = entries[rng.uniform_index(entries.size())];
    ++meta.neighbors_sampled;
    ad::Var c = model.score_entry(tape, e.source, e.position);
    terms.push_back(2.0 * static_cast<double>(entries.size()) * c);
  }
  return batch_mean(tape, terms, batch.size());
}

ad::Var estimate_j2_structured(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch, Rng& rng,
                               ObjectiveMeta& meta) {
  const auto& structure = model.structure();
  const auto& space = structure.space();
  const StructureKind kind = structure.kind();
  if (kind != StructureKind::Chain && kind != StructureKind::Cycle && kind != StructureKind::Grid) {
    throw Error("estimate_j2_structured: supported for chain, cycle and grid structures only, got " +
                to_string(kind));
  }
  std::vector<ad::Var> terms;
  for (const State& x : batch) {
    ++meta.states_visited;
    space.validate(x);
    if (kind != StructureKind::Grid) {
      const std::uint64_t idx = space.index(x);
      const std::uint64_t n = space.total_states();
      if (kind == StructureKind::Chain && idx == 0) {
        ++meta.skipped;
        continue;
      }
      const State pred = space.state(idx == 0 ? n - 1 : idx - 1);
      ++meta.neighbors_sampled;
      terms.push_back(2.0 * model.score_entry(tape, pred, 0));
      continue;
    }
    const std::size_t D = space.num_dims();
    const std::size_t d = rng.uniform_index(D);
    const int nd = space.dim(d);
    std::vector<State> sources;
    for (int step : {-1, 1}) {
      State s = x;
      int v = x[d] + step;
      if (v < 0 || v >= nd) {
        if (structure.boundary() == Boundary::Drop) continue;
        v = (v + nd) % nd;
      }
      s[d] = v;
      if (s == x) continue;
      bool seen = false;
      for (const State& t : sources) seen = seen || t == s;
      if (!seen) sources.push_back(std::move(s));
    }
    bool any = false;
    for (const State& s : sources) {
      const auto pos = structure.position_of(s, x);
      if (!pos) continue;
      ++meta.neighbors_sampled;
      terms.push_back(2.0 * static_cast<double>(D) * model.score_entry(tape, s, *pos));
      any = true;
    }
    if (!any) ++meta.skipped;
  }
  return batch_mean(tape, terms, batch.size());
}

ad::Var dcsm_loss(ad::Tape& tape, const ScoreModel& model, std::span<const State> batch, const NoiseKernel& kernel,
                  Rng& rng, ObjectiveMeta& meta) {
  const auto& structure = model.structure();
  if (!(kernel.space() == structure.space())) throw Error("dcsm_loss: kernel and model spaces differ");
  std::vector<ad::Var> terms;
  for (const State& x : batch) {
    ++meta.states_visited;
    const State noisy = kernel.sample(x, rng);
    const auto target = kernel_conditional_score(kernel, structure, x, noisy);
    if (target.empty()) {
      ++meta.skipped;
      continue;
    }
    meta.neighbors_sampled += target.size();
    ad::Var diff = model.score(tape, noisy) - tape.constant(target);
    terms.push_back(ad::sum(ad::square(diff)));
  }
  return batch_mean(tape, terms, batch.size());
}

ad::Var dcsm_loss_exact(ad::Tape& tape, const ScoreModel& model, const TabularDistribution& p,
                        const NoiseKernel& kernel, ObjectiveMeta& meta) {
  const auto& structure = model.structure();
  if (!(kernel.space() == structure.space()) || !(p.space() == structure.space())) {
    throw Error("dcsm_loss_exact: kernel, distribution and model spaces differ");
  }
  const auto states = p.space().enumerate();
  std::vector<ad::Var> terms;
  double constant = 0.0;
  for (const State& noisy : states) {
    ++meta.states_visited;
    const std::size_t deg = structure.degree(noisy);
    if (deg == 0) continue;
    // E||c - t||^2 = m ||c||^2 - 2 c.b + k, with weights p(x) q(noisy | x)
    double m = 0.0;
    std::vector<double> b(deg, 0.0);
    for (const State& clean : states) {
      const double w = p(clean) * kernel.joint(clean, noisy);
      if (w == 0.0) continue;
      m += w;
      const auto t = kernel_conditional_score(kernel, structure, clean, noisy);
      for (std::size_t i = 0; i < deg; ++i) {
        b[i] += w * t[i];
        constant += w * t[i] * t[i];
      }
    }
    if (m == 0.0) continue;
    meta.neighbors_sampled += deg;
    for (double& v : b) v *= -2.0;
    ad::Var c = model.score(tape, noisy);
    terms.push_back(ad::sum(c * (m * c + tape.constant(std::move(b)))));
  }
  return total(tape, terms) + constant;
}

ad::Var ratio_matching_loss(ad::Tape& tape, const DensityModel& model, std::span<const State> batch,
                            RatioVariant variant, ObjectiveMeta& meta) {
  std::vector<ad::Var> terms;
  for (const State& x : batch) {
    ++meta.states_visited;
    model.space().validate(x);
    for (std::size_t d = 0; d < x.size(); ++d) {
      ad::Var q = ad::exp(model.conditional_log_probs(tape, x, d));
      meta.neighbors_sampled += q.size();
      if (variant == RatioVariant::Fixed) {
        std::vector<double> onehot(q.size(), 0.0);
        onehot[x[d]] = 1.0;
        terms.push_back(ad::sum(ad::square(tape.constant(std::move(onehot)) - q)));
      } else {
        terms.push_back(ad::sum(ad::square(1.0 - q)));
      }
    }
  }
  return batch_mean(tape, terms, batch.size());
}

ad::Var marginalization_loss(ad::Tape& tape, const DensityModel& model, std::span<const State> batch,
                             RatioVariant variant, ObjectiveMeta& meta) {
  std::vector<ad::Var> terms;
  for (const State& x : batch) {
    ++meta.states_visited;
    model.space().validate(x);
    for (std::size_t d = 0; d < x.size(); ++d) {
      ad::Var q = ad::clamp_min(ad::exp(model.conditional_log_probs(tape, x, d)), kConditionalFloor, &meta.clamped);
      meta.neighbors_sampled += q.size();
      if (variant == RatioVariant::Fixed) {
        terms.push_back(1.0 / ad::square(ad::at(q, x[d])) - 2.0 * ad::sum(1.0 / q));
      } else {
        terms.push_back(ad::sum((1.0 - 2.0 * q) / ad::square(q)));
      }
    }
  }
  return batch_mean(tape, terms, batch.size());
}

ad::Var nll_loss(ad::Tape& tape, const DensityModel& model, std::span<const State> batch, ObjectiveMeta& meta) {
  if (batch.empty()) throw Error("nll_loss: empty batch");
  std::vector<ad::Var> terms;
  for (const State& x : batch) {
    ++meta.states_visited;
    terms.push_back(model.log_q(tape, x));
  }
  return model.log_partition(tape) - ad::add_all(terms) / static_cast<double>(batch.size());
}

}  // namespace record

// ---------------------------------------------------------------- evaluated forms

namespace {

template <class Build>
ObjectiveValue evaluate(const std::vector<double>& params, const char* name, Build&& build) {
  ObjectiveValue out;
  ad::Tape tape(params);
  ad::Var loss = build(tape, out.meta);
  tape.backward(loss);
  out.value = loss.value();
  out.grad.assign(tape.param_grad().begin(), tape.param_grad().end());
  if (!std::isfinite(out.value)) throw NumericError(std::string(name) + ": non-finite objective value");
  for (double g : out.grad) {
    if (!std::isfinite(g)) throw NumericError(std::string(name) + ": non-finite gradient");
  }
  return out;
}

}  // namespace

ObjectiveValue csm_loss_exact(const ScoreModel& model, const TabularDistribution& p) {
  return evaluate(model.parameters(), "csm_loss_exact",
                  [&](ad::Tape& t, ObjectiveMeta& m) { return record::csm_loss_exact(t, model, p, m); });
}

ObjectiveValue jcsm_exact(const ScoreModel& model, const TabularDistribution& p) {
  return evaluate(model.parameters(), "jcsm_exact",
                  [&](ad::Tape& t, ObjectiveMeta& m) { return record::jcsm_exact(t, model, p, m); });
}

ObjectiveValue estimate_j1(const ScoreModel& model, std::span<const State> batch, Rng& rng) {
  return evaluate(model.parameters(), "estimate_j1",
                  [&](ad::Tape& t, ObjectiveMeta& m) { return record::estimate_j1(t, model, batch, rng, m); });
}

ObjectiveValue estimate_j2(const ScoreModel& model, std::span<const State> batch, const ReverseIndex& reverse,
                           Rng& rng) {
  return evaluate(model.parameters(), "estimate_j2", [&](ad::Tape& t, ObjectiveMeta& m) {
    return record::estimate_j2(t, model, batch, reverse, rng, m);
  });
}

ObjectiveValue estimate_j2_structured(const ScoreModel& model, std::span<const State> batch, Rng& rng) {
  return evaluate(model.parameters(), "estimate_j2_structured", [&](ad::Tape& t, ObjectiveMeta& m) {
    return record::estimate_j2_structured(t, model, batch, rng, m);
  });
}

ObjectiveValue dcsm_loss(const ScoreModel& model, std::span<const State> batch, const NoiseKernel& kernel,
                         Rng& rng) {
  return evaluate(model.parameters(), "dcsm_loss",
                  [&](ad::Tape& t, ObjectiveMeta& m) { return record::dcsm_loss(t, model, batch, kernel, rng, m); });
}

ObjectiveValue dcsm_loss_exact(const ScoreModel& model, const TabularDistribution& p, const NoiseKernel& kernel) {
  return evaluate(model.parameters(), "dcsm_loss_exact",
                  [&](ad::Tape& t, ObjectiveMeta& m) { return record::dcsm_loss_exact(t, model, p, kernel, m); });
}

ObjectiveValue ratio_matching_loss(const DensityModel& model, std::span<const State> batch, RatioVariant variant) {
  return evaluate(model.parameters(), "ratio_matching_loss", [&](ad::Tape& t, ObjectiveMeta& m) {
    return record::ratio_matching_loss(t, model, batch, variant, m);
  });
}

ObjectiveValue marginalization_loss(const DensityModel& model, std::span<const State> batch, RatioVariant variant) {
  return evaluate(model.parameters(), "marginalization_loss", [&](ad::Tape& t, ObjectiveMeta& m) {
    return record::marginalization_loss(t, model, batch, variant, m);
  });
}

ObjectiveValue nll_loss(const DensityModel& model, std::span<const State> batch) {
  return evaluate(model.parameters(), "nll_loss",
                  [&](ad::Tape& t, ObjectiveMeta& m) { return record::nll_loss(t, model, batch, m); });
}

// ---------------------------------------------------------------- names

namespace {

struct ObjectiveName {
  ObjectiveKind kind;
  const char* name;
};

constexpr ObjectiveName kObjectiveNames[] = {
    {ObjectiveKind::CsmExact, "csm_exact"},           {ObjectiveKind::CsmMc, "csm_mc"},
    {ObjectiveKind::CsmStructured, "csm_structured"}, {ObjectiveKind::Dcsm, "dcsm"},
    {ObjectiveKind::RatioFixed, "ratio_fixed"},       {ObjectiveKind::RatioOriginal, "ratio_original"},
    {ObjectiveKind::MarginalFixed, "marginal_fixed"}, {ObjectiveKind::MarginalOriginal, "marginal_original"},
    {ObjectiveKind::Nll, "nll"},
};

}  // namespace

ObjectiveKind parse_objective(std::string_view name) {
  for (const auto& e : kObjectiveNames) {
    if (name == e.name) return e.kind;
  }
  throw Error("unknown objective '" + std::string(name) +
              "' (expected csm_exact, csm_mc, csm_structured, dcsm, ratio_fixed, ratio_original, "
              "marginal_fixed, marginal_original or nll)");
}

std::string to_string(ObjectiveKind kind) {
  for (const auto& e : kObjectiveNames) {
    if (e.kind == kind) return e.name;
  }
  return "unknown";
}

bool needs_density(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::RatioFixed:
    case ObjectiveKind::RatioOriginal:
    case ObjectiveKind::MarginalFixed:
    case ObjectiveKind::MarginalOriginal:
    case ObjectiveKind::Nll:
      return true;
    default:
      return false;
  }
}

}  // namespace csm

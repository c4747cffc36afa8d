#include "csm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "csm/error.hpp"

namespace csm {

ChainStats& ChainStats::operator+=(const ChainStats& o) {
  accepted += o.accepted;
  proposed += o.proposed;
  negative_ratios += o.negative_ratios;
  irreversible += o.irreversible;
  return *this;
}

namespace {

struct Proposal {
  double accept = 0.0;
  bool negative = false;
  bool irreversible = false;
};

Proposal evaluate_proposal(const ScoreModel& model, const State& x, std::size_t i, const State& y,
                           std::size_t deg_x) {
  const auto& structure = model.structure();
  Proposal p;
  double r = model.score_entry(x, i) + 1.0;
  if (!std::isfinite(r)) throw NumericError("mh_step: non-finite score entry at " + to_string(x));
  if (r < 0.0) {
    r = 0.0;
    p.negative = true;
  }
  if (!structure.symmetric() && !structure.position_of(y, x)) {
    p.irreversible = true;
    return p;
  }
  const std::size_t deg_y = structure.degree(y);
  p.accept = std::min(1.0, r * static_cast<double>(deg_x) / static_cast<double>(deg_y));
  return p;
}

void check_steps(std::size_t steps, std::size_t burn_in, std::size_t thin) {
  if (thin == 0) throw Error("run_chain: thin must be positive");
  if (burn_in > steps) throw Error("run_chain: burn-in exceeds the number of steps");
}

std::vector<State> chain_unchecked(const ScoreModel& model, const State& init, std::size_t steps,
                                   std::size_t burn_in, std::size_t thin, Rng& rng, ChainStats* stats) {
  ChainState chain(init, rng);
  std::vector<State> out;
  out.reserve((steps - burn_in) / thin + 1);
  if (burn_in == 0) out.push_back(chain.current);
  for (std::size_t t = 1; t <= steps; ++t) {
    mh_step(chain, model);
    if (t >= burn_in && (t - burn_in) % thin == 0) out.push_back(chain.current);
  }
  rng = chain.rng;
  if (stats) {
    stats->accepted += chain.accepted;
    stats->proposed += chain.proposed;
    stats->negative_ratios += chain.negative_ratios;
    stats->irreversible += chain.irreversible;
  }
  return out;
}

void require_connected(const ScoreModel& model, const std::optional<std::vector<State>>& support) {
  const auto& structure = model.structure();
  if (support) {
    if (!is_weakly_connected(structure, *support)) {
      throw Disconnected("run_chain: the structure is not weakly connected on the declared support");
    }
  } else if (structure.space().enumerable()) {
    if (!is_weakly_connected(structure)) {
      throw Disconnected("run_chain: the structure is not weakly connected on the state space");
    }
  }
}

}  // namespace

double acceptance_probability(const ScoreModel& model, const State& x, std::size_t i) {
  const auto& structure = model.structure();
  const std::size_t deg = structure.degree(x);
  if (i >= deg) throw Error("acceptance_probability: neighbor index out of range");
  return evaluate_proposal(model, x, i, structure.neighbor(x, i), deg).accept;
}

void mh_step(ChainState& chain, const ScoreModel& model) {
  const auto& structure = model.structure();
  const std::size_t deg = structure.degree(chain.current);
  if (deg == 0) throw InvalidState("mh_step: state " + to_string(chain.current) + " has no neighbors");
  const std::size_t i = chain.rng.uniform_index(deg);
  State y = structure.neighbor(chain.current, i);
  const Proposal p = evaluate_proposal(model, chain.current, i, y, deg);
  const double u = chain.rng.uniform();
  ++chain.proposed;
  ++chain.step;
  if (p.negative) ++chain.negative_ratios;
  if (p.irreversible) ++chain.irreversible;
  if (u < p.accept) {
    chain.current = std::move(y);
    ++chain.accepted;
  }
}

std::vector<State> run_chain(const ScoreModel& model, const State& init, std::size_t steps, std::size_t burn_in,
                             std::size_t thin, Rng& rng, ChainStats* stats,
                             const std::optional<std::vector<State>>& support) {
  check_steps(steps, burn_in, thin);
  model.structure().space().validate(init);
  require_connected(model, support);
  return chain_unchecked(model, init, steps, burn_in, thin, rng, stats);
}

std::vector<std::vector<State>> run_chains(const ScoreModel& model, const std::vector<State>& inits,
                                           std::size_t steps, std::size_t burn_in, std::size_t thin,
                                           std::uint64_t seed, std::size_t threads, ChainStats* stats) {
  check_steps(steps, burn_in, thin);
  for (const State& x : inits) model.structure().space().validate(x);
  require_connected(model, std::nullopt);
  const std::size_t n = inits.size();
  std::vector<std::vector<State>> out(n);
  std::vector<ChainStats> per_chain(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  auto work = [&](std::size_t begin) {
    for (std::size_t k = begin; k < n; k += threads) {
      Rng rng(seed, k);
      out[k] = chain_unchecked(model, inits[k], steps, burn_in, thin, rng, &per_chain[k]);
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  if (stats) {
    for (const auto& s : per_chain) *stats += s;
  }
  return out;
}

std::vector<State> run_annealed(std::span<const ScoreModel* const> models, const State& init,
                                std::size_t steps_per_level, std::size_t burn_in, std::size_t thin, Rng& rng,
                                ChainStats* stats) {
  if (models.empty()) throw Error("run_annealed: no noise levels given");
  for (const ScoreModel* m : models) {
    if (m == nullptr) throw Error("run_annealed: null model");
    if (!(m->structure().space() == models.front()->structure().space())) {
      throw Error("run_annealed: all levels must share one state space");
    }
  }
  check_steps(steps_per_level, 0, 1);
  State x = init;
  for (std::size_t level = 0; level + 1 < models.size(); ++level) {
    x = run_chain(*models[level], x, steps_per_level, steps_per_level, 1, rng, stats).back();
  }
  return run_chain(*models.back(), x, steps_per_level, burn_in, thin, rng, stats);
}

std::vector<std::vector<double>> langevin(const VectorFn& score_fn, std::vector<double> init, double step_size,
                                          std::size_t steps, Rng& rng, const LangevinOptions& options) {
  if (!(step_size > 0.0)) throw Error("langevin: step size must be positive");
  if (options.thin == 0) throw Error("langevin: thin must be positive");
  if (options.burn_in > steps) throw Error("langevin: burn-in exceeds the number of steps");
  const double noise_scale = std::sqrt(step_size);
  std::vector<double> x = std::move(init);
  std::vector<double> proposal(x.size());
  std::vector<std::vector<double>> out;
  if (options.burn_in == 0) out.push_back(x);
  for (std::size_t t = 1; t <= steps; ++t) {
    const std::vector<double> s = score_fn(x);
    if (s.size() != x.size()) throw Error("langevin: score dimension does not match the state");
    for (std::size_t d = 0; d < x.size(); ++d) {
      if (!std::isfinite(s[d])) throw NumericError("langevin: non-finite score at step " + std::to_string(t));
      proposal[d] = x[d] + 0.5 * step_size * s[d] + (options.noise ? noise_scale * rng.normal() : 0.0);
    }
    if (!options.domain || options.domain(proposal)) x = proposal;
    if (t >= options.burn_in && (t - options.burn_in) % options.thin == 0) out.push_back(x);
  }
  return out;
}

void write_samples_csv(const std::vector<State>& samples, std::ostream& out) {
  for (const State& x : samples) {
    for (std::size_t d = 0; d < x.size(); ++d) {
      if (d) out << ',';
      out << x[d];
    }
    out << '\n';
  }
}

void write_pgm_histogram(const std::vector<State>& samples, const DiscreteSpace& space, std::ostream& out) {
  if (space.num_dims() != 2) throw Error("PGM histograms need a 2-D space");
  const int rows = space.dim(0);
  const int cols = space.dim(1);
  std::vector<std::size_t> counts(static_cast<std::size_t>(rows) * cols, 0);
  for (const State& x : samples) {
    space.validate(x);
    ++counts[static_cast<std::size_t>(x[0]) * cols + x[1]];
  }
  const std::size_t peak = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  out << "P2\n" << cols << ' ' << rows << "\n255\n";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t n = counts[static_cast<std::size_t>(r) * cols + c];
      const long v = peak == 0 ? 0 : std::lround(255.0 * static_cast<double>(n) / static_cast<double>(peak));
      out << v << (c + 1 < cols ? ' ' : '\n');
    }
  }
}

}  // namespace csm

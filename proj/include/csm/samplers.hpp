#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "csm/graphs.hpp"
#include "csm/models.hpp"
#include "csm/rng.hpp"
#include "csm/space.hpp"

namespace csm {

struct ChainState {
  State current;
  std::size_t step = 0;
  Rng rng;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  /// Proposals whose score entry was below -1 (ratio clamped to 0).
  std::size_t negative_ratios = 0;
  /// Proposals rejected because the reverse move does not exist.
  std::size_t irreversible = 0;

  ChainState(State init, Rng r) : current(std::move(init)), rng(r) {}
  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

/// Acceptance probability of moving from x to N(x)_i under the
/// uniform-neighbor proposal: min(1, r |N(x)| / |N(x')|) with
/// r = max(0, c(x)_i + 1), or 0 when x is not a neighbor of x'.
double acceptance_probability(const ScoreModel& model, const State& x, std::size_t i);

/// One Metropolis-Hastings update in place. Throws InvalidState when the
/// current state has no neighbor.
void mh_step(ChainState& chain, const ScoreModel& model);

struct ChainStats {
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  std::size_t negative_ratios = 0;
  std::size_t irreversible = 0;

  ChainStats& operator+=(const ChainStats& o);
  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

/// Runs `steps` MH updates from init and returns x_t for burn_in <= t <= steps
/// with (t - burn_in) % thin == 0, so steps = 0 yields just the initial
/// state. Refuses to start (Disconnected) when the structure is not weakly
/// connected on `support` (the whole space when omitted and enumerable).
std::vector<State> run_chain(const ScoreModel& model, const State& init, std::size_t steps, std::size_t burn_in,
                             std::size_t thin, Rng& rng, ChainStats* stats = nullptr,
                             const std::optional<std::vector<State>>& support = std::nullopt);

/// Independent chains, chain k driven by Rng(seed, k), spread over up to
/// `threads` workers (0 = hardware concurrency). Output is independent of
/// the thread count.
std::vector<std::vector<State>> run_chains(const ScoreModel& model, const std::vector<State>& inits,
                                           std::size_t steps, std::size_t burn_in, std::size_t thin,
                                           std::uint64_t seed, std::size_t threads = 0,
                                           ChainStats* stats = nullptr);

/// Levels ordered from highest to lowest noise; each level runs a chain
/// started from the previous level's final state. Returns the last level's
/// samples, so a single level is exactly run_chain.
std::vector<State> run_annealed(std::span<const ScoreModel* const> models, const State& init,
                                std::size_t steps_per_level, std::size_t burn_in, std::size_t thin, Rng& rng,
                                ChainStats* stats = nullptr);

using VectorFn = std::function<std::vector<double>(std::span<const double>)>;

struct LangevinOptions {
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  /// false turns the update into plain gradient ascent (testing aid).
  bool noise = true;
  /// Proposals failing this predicate are discarded (the chain stays put).
  std::function<bool(std::span<const double>)> domain;
};

/// x <- x + (eps/2) s(x) + sqrt(eps) z, z ~ N(0, I). Returns x_t for
/// burn_in <= t <= steps, thinned like run_chain.
std::vector<std::vector<double>> langevin(const VectorFn& score_fn, std::vector<double> init, double step_size,
                                          std::size_t steps, Rng& rng, const LangevinOptions& options = {});

/// One state per line, coordinates comma-separated.
void write_samples_csv(const std::vector<State>& samples, std::ostream& out);
/// P2 greyscale histogram of 2-D samples: dims[0] rows, dims[1] columns,
/// counts scaled so the fullest cell is 255.
void write_pgm_histogram(const std::vector<State>& samples, const DiscreteSpace& space, std::ostream& out);

}  // namespace csm

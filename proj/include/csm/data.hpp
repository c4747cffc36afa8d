#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csm/exact.hpp"
#include "csm/objectives.hpp"
#include "csm/rng.hpp"
#include "csm/space.hpp"

namespace csm {

struct Dataset {
  DiscreteSpace space;
  std::vector<State> samples;
  std::string name;
  std::uint64_t seed = 0;
  /// Exact generating distribution, when the generator knows it.
  std::optional<TabularDistribution> truth;
};

/// Ground truth of the 16-category toy: a floor of 0.02 plus Gaussian
/// bumps of height 0.4 at 3 (width 1.2) and 0.6 at 10.5 (width 1.8),
/// normalized.
TabularDistribution toy_1d_distribution();
Dataset gen_1d_toy(std::size_t n, std::uint64_t seed);

/// Bin masses of a 2-D toy on a bins x bins grid covering [-4, 4]^2.
///
/// checkerboard: 7 x 7 board of equal squares, the 25 squares with even
///   i + j ("on") share 99.5% of the mass, the 24 others 0.5%, uniform
///   within each square.
/// spirals: two Archimedean arms r = 0.5 + theta / pi, theta in [0, 3 pi],
///   the second rotated by pi, blurred by an isotropic Gaussian (sd 0.1).
/// rings: circles of radius 1 and 2 chosen in proportion to their length,
///   blurred the same way.
/// Curve densities are integrated per bin with Gaussian CDFs along a fine
/// midpoint rule and renormalized to the square.
TabularDistribution toy_2d_distribution(const std::string& name, int bins = 91);
Dataset gen_2d_toy(const std::string& name, std::size_t n, int bins, std::uint64_t seed);

/// Rows of comma-separated 0/1 values; dims = [2] * D. `header` skips the
/// first line. Ragged rows and non-binary values raise ParseError naming
/// the line.
Dataset parse_tabular_csv(std::istream& in, bool header = false, const std::string& name = "csv");
Dataset load_tabular_csv(const std::string& path, bool header = false);
/// Writes the samples in the same format (atomically).
void save_tabular_csv(const Dataset& data, const std::string& path);

NoiseKernel make_noise_kernel(double w, const DiscreteSpace& space);

/// Indices drawn uniformly with replacement.
std::vector<State> sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng);

}  // namespace csm

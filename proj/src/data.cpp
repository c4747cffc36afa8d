#include "csm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "csm/error.hpp"
#include "csm/io.hpp"

namespace csm {

namespace {

constexpr double kLow = -4.0;
constexpr double kHigh = 4.0;
constexpr double kBlur = 0.1;
constexpr int kBoard = 7;
constexpr double kOffShare = 0.005;
constexpr int kCurveNodes = 8000;

State draw_from(const TabularDistribution& p, Rng& rng, const std::vector<double>& cdf) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  return p.space().state(idx);
}

std::vector<double> cumulative(std::span<const double> mass) {
  std::vector<double> cdf(mass.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) cdf[i] = (acc += mass[i]);
  return cdf;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// A point on one of the curve toys for curve parameter t in [0, 1).
struct CurvePoint {
  double x;
  double y;
};

CurvePoint spiral_point(int arm, double t) {
  const double theta = 3.0 * std::numbers::pi * t;
  const double r = 0.5 + theta / std::numbers::pi;
  const double phi = theta + arm * std::numbers::pi;
  return {r * std::cos(phi), r * std::sin(phi)};
}

CurvePoint ring_point(double radius, double t) {
  const double phi = 2.0 * std::numbers::pi * t;
  return {radius * std::cos(phi), radius * std::sin(phi)};
}

// Components of a curve toy: (weight, curve) pairs.
struct Component {
  double weight;
  CurvePoint (*point)(double param, double t);
  double param;
};

CurvePoint spiral_arm(double arm, double t) { return spiral_point(static_cast<int>(arm), t); }

std::vector<Component> curve_components(const std::string& name) {
  if (name == "spirals") return {{0.5, spiral_arm, 0.0}, {0.5, spiral_arm, 1.0}};
  if (name == "rings") return {{1.0 / 3.0, ring_point, 1.0}, {2.0 / 3.0, ring_point, 2.0}};
  throw Error("unknown 2-D toy '" + name + "' (expected checkerboard, spirals or rings)");
}

int quantize(double v, int bins) {
  const int b = static_cast<int>(std::floor((v - kLow) / (kHigh - kLow) * bins));
  return std::clamp(b, 0, bins - 1);
}

bool inside(double v) { return v >= kLow && v < kHigh; }

std::vector<double> checkerboard_masses(int bins) {
  const double side = (kHigh - kLow) / kBoard;
  const double width = (kHigh - kLow) / bins;
  // overlap[j * kBoard + i] = |bin j intersect column i|
  std::vector<double> overlap(static_cast<std::size_t>(bins) * kBoard, 0.0);
  for (int j = 0; j < bins; ++j) {
    const double a = kLow + j * width;
    const double b = a + width;
    for (int i = 0; i < kBoard; ++i) {
      const double lo = std::max(a, kLow + i * side);
      const double hi = std::min(b, kLow + (i + 1) * side);
      overlap[static_cast<std::size_t>(j) * kBoard + i] = std::max(0.0, hi - lo);
    }
  }
  const int on_squares = (kBoard * kBoard + 1) / 2;
  const int off_squares = kBoard * kBoard - on_squares;
  const double on_density = (1.0 - kOffShare) / on_squares / (side * side);
  const double off_density = kOffShare / off_squares / (side * side);
  std::vector<double> mass(static_cast<std::size_t>(bins) * bins, 0.0);
  for (int r = 0; r < bins; ++r) {
    for (int c = 0; c < bins; ++c) {
      double m = 0.0;
      for (int i = 0; i < kBoard; ++i) {
        const double ox = overlap[static_cast<std::size_t>(r) * kBoard + i];
        if (ox == 0.0) continue;
        for (int k = 0; k < kBoard; ++k) {
          const double oy = overlap[static_cast<std::size_t>(c) * kBoard + k];
          if (oy == 0.0) continue;
          m += ox * oy * (((i + k) % 2 == 0) ? on_density : off_density);
        }
      }
      mass[static_cast<std::size_t>(r) * bins + c] = m;
    }
  }
  return mass;
}

std::vector<double> curve_masses(const std::string& name, int bins) {
  const auto components = curve_components(name);
  const double width = (kHigh - kLow) / bins;
  std::vector<double> mass(static_cast<std::size_t>(bins) * bins, 0.0);
  std::vector<double> px(bins), py(bins);
  for (const Component& comp : components) {
    const double w = comp.weight / kCurveNodes;
    for (int k = 0; k < kCurveNodes; ++k) {
      const CurvePoint c = comp.point(comp.param, (k + 0.5) / kCurveNodes);
      for (int j = 0; j < bins; ++j) {
        const double a = kLow + j * width;
        px[j] = normal_cdf((a + width - c.x) / kBlur) - normal_cdf((a - c.x) / kBlur);
        py[j] = normal_cdf((a + width - c.y) / kBlur) - normal_cdf((a - c.y) / kBlur);
      }
      for (int r = 0; r < bins; ++r) {
        if (px[r] < 1e-18) continue;
        const double wx = w * px[r];
        double* row = &mass[static_cast<std::size_t>(r) * bins];
        for (int col = 0; col < bins; ++col) row[col] += wx * py[col];
      }
    }
  }
  return mass;
}

}  // namespace

TabularDistribution toy_1d_distribution() {
  std::vector<double> w(16);
  for (int k = 0; k < 16; ++k) {
    const double a = (k - 3.0) / 1.2;
    const double b = (k - 10.5) / 1.8;
    w[k] = 0.02 + 0.4 * std::exp(-0.5 * a * a) + 0.6 * std::exp(-0.5 * b * b);
  }
  return TabularDistribution::from_weights(DiscreteSpace({16}), std::move(w));
}

Dataset gen_1d_toy(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("gen_1d_toy: n must be positive");
  TabularDistribution p = toy_1d_distribution();
  const auto cdf = cumulative(p.mass());
  Rng rng(seed, 0x1d);
  Dataset data{p.space(), {}, "toy1d", seed, std::nullopt};
  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) data.samples.push_back(draw_from(p, rng, cdf));
  data.truth = std::move(p);
  return data;
}

TabularDistribution toy_2d_distribution(const std::string& name, int bins) {
  if (bins < 2) throw Error("2-D toys need at least 2 bins per axis");
  std::vector<double> mass = name == "checkerboard" ? checkerboard_masses(bins) : curve_masses(name, bins);
  return TabularDistribution::from_weights(DiscreteSpace({bins, bins}), std::move(mass));
}

Dataset gen_2d_toy(const std::string& name, std::size_t n, int bins, std::uint64_t seed) {
  if (n == 0) throw Error("gen_2d_toy: n must be positive");
  TabularDistribution truth = toy_2d_distribution(name, bins);
  Rng rng(seed, 0x2d);
  Dataset data{truth.space(), {}, name, seed, std::nullopt};
  data.samples.reserve(n);
  if (name == "checkerboard") {
    const double side = (kHigh - kLow) / kBoard;
    while (data.samples.size() < n) {
      const bool on = rng.uniform() >= kOffShare;
      // squares of the chosen colour, in row-major order
      const std::size_t count = on ? (kBoard * kBoard + 1) / 2 : kBoard * kBoard / 2;
      const std::size_t pick = rng.uniform_index(count);
      std::size_t seen = 0;
      int si = 0, sk = 0;
      for (int i = 0; i < kBoard; ++i) {
        for (int k = 0; k < kBoard; ++k) {
          if (((i + k) % 2 == 0) != on) continue;
          if (seen++ == pick) {
            si = i;
            sk = k;
          }
        }
      }
      const double x = kLow + (si + rng.uniform()) * side;
      const double y = kLow + (sk + rng.uniform()) * side;
      if (!inside(x) || !inside(y)) continue;
      data.samples.push_back({quantize(x, bins), quantize(y, bins)});
    }
  } else {
    const auto components = curve_components(name);
    while (data.samples.size() < n) {
      const double u = rng.uniform();
      std::size_t c = 0;
      double acc = components[0].weight;
      while (u >= acc && c + 1 < components.size()) acc += components[++c].weight;
      const CurvePoint pt = components[c].point(components[c].param, rng.uniform());
      const double x = pt.x + kBlur * rng.normal();
      const double y = pt.y + kBlur * rng.normal();
      if (!inside(x) || !inside(y)) continue;
      data.samples.push_back({quantize(x, bins), quantize(y, bins)});
    }
  }
  data.truth = std::move(truth);
  return data;
}

Dataset parse_tabular_csv(std::istream& in, bool header, const std::string& name) {
  std::vector<State> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header && lineno == 1) continue;
    if (line.empty()) continue;
    State row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      const std::string v = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
      if (v != "0" && v != "1") {
        throw ParseError("line " + std::to_string(lineno) + ": expected 0 or 1, got '" + v + "'");
      }
      row.push_back(v == "1" ? 1 : 0);
    }
    if (line.back() == ',') throw ParseError("line " + std::to_string(lineno) + ": trailing comma");
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError("line " + std::to_string(lineno) + ": ragged row with " + std::to_string(row.size()) +
                       " values, expected " + std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("tabular csv: no data rows");
  return Dataset{DiscreteSpace::binary(width), std::move(rows), name, 0, std::nullopt};
}

Dataset load_tabular_csv(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return parse_tabular_csv(in, header, path);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_tabular_csv(const Dataset& data, const std::string& path) {
  std::ostringstream out;
  for (const State& x : data.samples) {
    for (std::size_t d = 0; d < x.size(); ++d) out << (d ? "," : "") << x[d];
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

NoiseKernel make_noise_kernel(double w, const DiscreteSpace& space) { return NoiseKernel(space, w); }

std::vector<State> sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
  if (data.samples.empty()) throw Error("sample_batch: empty dataset");
  std::vector<State> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(data.samples[rng.uniform_index(data.samples.size())]);
  return batch;
}

}  // namespace csm

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "csm/data.hpp"
#include "csm/error.hpp"
#include "csm/exact.hpp"
#include "csm/samplers.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace csm;
using csm::testing::FixedScoreModel;
using doctest::Approx;

namespace {

FixedScoreModel constant_model(const NeighborhoodStructure& s, double c) {
  return FixedScoreModel(s, [s, c](const State& x) { return std::vector<double>(s.degree(x), c); });
}

TabularDistribution histogram(const DiscreteSpace& space, const std::vector<State>& samples) {
  return TabularDistribution::empirical(space, samples);
}

// Two-sample Kolmogorov-Smirnov p-value from the asymptotic distribution.
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("acceptance probabilities by hand") {
  const auto ring = build_structure(StructureKind::Grid, DiscreteSpace({8}), Boundary::Wrap);
  CHECK(acceptance_probability(constant_model(ring, 1.5), {3}, 0) == 1.0);
  CHECK(acceptance_probability(constant_model(ring, -0.5), {3}, 1) == Approx(0.5));
  CHECK(acceptance_probability(constant_model(ring, -1.5), {3}, 1) == 0.0);
  // Degree correction: moving from a degree-1 end to a degree-2 interior halves the ratio.
  const auto line = build_structure(StructureKind::Grid, DiscreteSpace({5}));
  CHECK(acceptance_probability(constant_model(line, 0.0), {0}, 0) == Approx(0.5));
  CHECK(acceptance_probability(constant_model(line, 0.0), {1}, 1) == 1.0);
  // A directed cycle has no reverse moves.
  const auto cycle = build_structure(StructureKind::Cycle, DiscreteSpace({8}));
  CHECK(acceptance_probability(constant_model(cycle, 0.0), {3}, 0) == 0.0);
}

TEST_CASE("uniform models accept every proposal on symmetric structures") {
  const auto ring = build_structure(StructureKind::Grid, DiscreteSpace({4, 4}), Boundary::Wrap);
  ChainState chain({0, 0}, Rng(1));
  const auto model = constant_model(ring, 0.0);
  for (int t = 0; t < 500; ++t) mh_step(chain, model);
  CHECK(chain.accepted == 500);
  CHECK(chain.step == 500);
}

TEST_CASE("negative score entries are clamped and counted") {
  const auto ring = build_structure(StructureKind::Grid, DiscreteSpace({6}), Boundary::Wrap);
  ChainState chain({2}, Rng(2));
  const auto model = constant_model(ring, -3.0);
  for (int t = 0; t < 50; ++t) mh_step(chain, model);
  CHECK(chain.current == State{2});
  CHECK(chain.negative_ratios == 50);
}

TEST_CASE("the toy chain matches its softmax") {
  const auto p = toy_1d_distribution();
  LogitTableModel table(p.space(), csm::testing::log_of(p.mass()));
  const auto ring = build_structure(StructureKind::Grid, p.space(), Boundary::Wrap);
  ImpliedScoreModel model(table, ring);
  Rng rng(3);
  const auto samples = run_chain(model, {0}, 100000, 10000, 1, rng);
  CHECK(samples.size() == 90001);
  CHECK(kl_and_tv(histogram(p.space(), samples), table.distribution()).tv < 0.02);
}

TEST_CASE("a directed cycle never moves") {
  const auto p = toy_1d_distribution();
  LogitTableModel table(p.space(), csm::testing::log_of(p.mass()));
  ImpliedScoreModel model(table, build_structure(StructureKind::Cycle, p.space()));
  Rng rng(4);
  ChainStats stats;
  const auto samples = run_chain(model, {5}, 1000, 0, 1, rng, &stats);
  CHECK(std::all_of(samples.begin(), samples.end(), [](const State& x) { return x == State{5}; }));
  CHECK(stats.irreversible == 1000);
}

TEST_CASE("a near point mass holds the chain") {
  const DiscreteSpace space({16});
  std::vector<double> logits(16, 0.0);
  logits[7] = 12.0;
  LogitTableModel table(space, logits);
  ImpliedScoreModel model(table, build_structure(StructureKind::Grid, space, Boundary::Wrap));
  Rng rng(5);
  const auto samples = run_chain(model, {0}, 20000, 2000, 1, rng);
  const auto hits = std::count(samples.begin(), samples.end(), State{7});
  CHECK(static_cast<double>(hits) / samples.size() >= 0.99);
}

TEST_CASE("symmetric two-state occupancy") {
  const DiscreteSpace space({2});
  LogitTableModel table(space, {0.4, 0.4});
  ImpliedScoreModel model(table, build_structure(StructureKind::Complete, space));
  Rng rng(6);
  const auto samples = run_chain(model, {0}, 20000, 1000, 1, rng);
  const double ones = std::count(samples.begin(), samples.end(), State{1});
  CHECK(std::abs(ones / samples.size() - 0.5) < 0.02);
}

TEST_CASE("steps, burn-in and thinning") {
  const auto ring = build_structure(StructureKind::Grid, DiscreteSpace({6}), Boundary::Wrap);
  const auto model = constant_model(ring, 0.0);
  Rng rng(7);
  CHECK(run_chain(model, {4}, 0, 0, 1, rng) == std::vector<State>{{4}});
  CHECK(run_chain(model, {4}, 10, 4, 3, rng).size() == 3);  // t = 4, 7, 10
  CHECK_THROWS_AS(run_chain(model, {4}, 10, 11, 1, rng), Error);
  CHECK_THROWS_AS(run_chain(model, {4}, 10, 0, 0, rng), Error);
  CHECK_THROWS_AS(run_chain(model, {6}, 10, 0, 1, rng), InvalidState);
}

TEST_CASE("disconnected structures are refused") {
  const auto two = build_explicit_structure(DiscreteSpace({4}), {{{0}, {1}}, {{1}, {0}}, {{2}, {3}}, {{3}, {2}}});
  const auto model = constant_model(two, 0.0);
  Rng rng(8);
  CHECK_THROWS_AS(run_chain(model, {0}, 10, 0, 1, rng), Disconnected);
  const std::vector<State> half{{0}, {1}};
  CHECK(run_chain(model, {0}, 10, 0, 1, rng, nullptr, half).size() == 11);
}

TEST_CASE("detailed balance on a symmetric structure") {
  const DiscreteSpace space({5});
  LogitTableModel table(space, {0.1, -0.5, 0.8, 0.0, -1.0});
  ImpliedScoreModel model(table, build_structure(StructureKind::Grid, space, Boundary::Wrap));
  Rng rng(9);
  const auto samples = run_chain(model, {0}, 1000000, 0, 1, rng);
  std::map<std::pair<int, int>, double> flow;
  for (std::size_t t = 1; t < samples.size(); ++t) {
    if (samples[t] != samples[t - 1]) ++flow[{samples[t - 1][0], samples[t][0]}];
  }
  for (int a = 0; a < 5; ++a) {
    const int b = (a + 1) % 5;
    const double ab = flow[{a, b}], ba = flow[{b, a}];
    CHECK(ab > 1000);
    CHECK(std::abs(ab - ba) < 3.0 * std::sqrt(ab + ba));
  }
}

TEST_CASE("parallel chains do not depend on the thread count") {
  const auto p = toy_1d_distribution();
  LogitTableModel table(p.space(), csm::testing::log_of(p.mass()));
  ImpliedScoreModel model(table, build_structure(StructureKind::Grid, p.space(), Boundary::Wrap));
  const std::vector<State> inits{{0}, {3}, {8}, {15}, {1}, {9}};
  ChainStats one_stats, many_stats;
  const auto one = run_chains(model, inits, 500, 100, 2, 77, 1, &one_stats);
  const auto many = run_chains(model, inits, 500, 100, 2, 77, 4, &many_stats);
  CHECK(one == many);
  CHECK(one_stats.accepted == many_stats.accepted);
  Rng rng(77, 2);
  CHECK(run_chain(model, inits[2], 500, 100, 2, rng) == one[2]);
}

TEST_CASE("a single annealing level is a plain chain") {
  const auto ring = build_structure(StructureKind::Grid, DiscreteSpace({16}), Boundary::Wrap);
  LogitTableModel table(DiscreteSpace({16}), std::vector<double>(16, 0.0));
  table.parameters()[4] = 1.5;
  ImpliedScoreModel model(table, ring);
  const std::vector<const ScoreModel*> levels{&model};
  Rng a(10), b(10);
  CHECK(run_annealed(levels, {0}, 300, 50, 5, a) == run_chain(model, {0}, 300, 50, 5, b));
}

TEST_CASE("two identical levels match a chain of double length") {
  const DiscreteSpace space({16});
  const auto p = toy_1d_distribution();
  LogitTableModel table(space, csm::testing::log_of(p.mass()));
  ImpliedScoreModel model(table, build_structure(StructureKind::Grid, space, Boundary::Wrap));
  const std::vector<const ScoreModel*> levels{&model, &model};
  std::vector<double> annealed, single;
  for (int rep = 0; rep < 100; ++rep) {
    Rng a(11, rep), b(12, rep);
    annealed.push_back(run_annealed(levels, {0}, 6, 0, 1, a).back()[0]);
    single.push_back(run_chain(model, {0}, 12, 0, 1, b).back()[0]);
  }
  CHECK(ks_p_value(annealed, single) > 0.01);
}

TEST_CASE("annealing ends on the last level's modes") {
  const DiscreteSpace space({16});
  const auto ring = build_structure(StructureKind::Grid, space, Boundary::Wrap);
  std::vector<double> first(16, -6.0), last(16, -6.0);
  first[2] = first[3] = 0.0;
  last[11] = last[12] = 0.0;
  LogitTableModel t1(space, first), t2(space, last);
  ImpliedScoreModel m1(t1, ring), m2(t2, ring);
  const std::vector<const ScoreModel*> levels{&m1, &m2};
  Rng rng(13);
  const auto samples = run_annealed(levels, {0}, 4000, 1000, 1, rng);
  const auto on = std::count_if(samples.begin(), samples.end(), [](const State& x) { return x[0] == 11 || x[0] == 12; });
  CHECK(static_cast<double>(on) / samples.size() > 0.95);
}

TEST_CASE("langevin with zero score is a Gaussian random walk") {
  const double eps = 0.04;
  Rng rng(14);
  const auto path = langevin([](std::span<const double> x) { return std::vector<double>(x.size(), 0.0); }, {0.0, 0.0},
                             eps, 50000, rng);
  REQUIRE(path.size() == 50001);
  double ss = 0.0;
  for (std::size_t t = 1; t < path.size(); ++t) ss += std::pow(path[t][0] - path[t - 1][0], 2);
  CHECK(ss / 50000.0 == Approx(eps).epsilon(0.03));
}

TEST_CASE("langevin on a standard normal") {
  const double eps = 0.01;
  Rng rng(15);
  LangevinOptions opt;
  opt.burn_in = 1000;
  const auto path = langevin(
      [](std::span<const double> x) {
        std::vector<double> s(x.begin(), x.end());
        for (double& v : s) v = -v;
        return s;
      },
      {0.0}, eps, 100000, rng, opt);
  double m = 0.0, v = 0.0;
  for (const auto& x : path) m += x[0];
  m /= path.size();
  for (const auto& x : path) v += (x[0] - m) * (x[0] - m);
  v /= path.size();
  const double stationary = 1.0 / (1.0 - eps / 4.0);
  CHECK(std::abs(v - stationary) < 0.1 * stationary);
}

TEST_CASE("langevin without noise ascends and respects the domain") {
  Rng rng(16);
  LangevinOptions opt;
  opt.noise = false;
  const auto path = langevin([](std::span<const double> x) { return std::vector<double>{2.0 - x[0]}; }, {0.0}, 0.5,
                             200, rng, opt);
  CHECK(path.back()[0] == Approx(2.0).epsilon(1e-6));
  opt.noise = true;
  opt.domain = [](std::span<const double> x) { return x[0] >= 0.0; };
  const auto kept = langevin([](std::span<const double>) { return std::vector<double>{0.0}; }, {0.0}, 1.0, 500, rng, opt);
  for (const auto& x : kept) CHECK(x[0] >= 0.0);
}

TEST_CASE("sample writers") {
  std::ostringstream csv;
  write_samples_csv({{1, 2}, {0, 3}}, csv);
  CHECK(csv.str() == "1,2\n0,3\n");
  std::ostringstream pgm;
  write_pgm_histogram({{0, 1}, {0, 1}, {1, 0}}, DiscreteSpace({2, 3}), pgm);
  CHECK(pgm.str().rfind("P2\n3 2\n255\n", 0) == 0);
  CHECK(pgm.str().find("0 255 0") != std::string::npos);
  std::ostringstream none;
  CHECK_THROWS_AS(write_pgm_histogram({{0}}, DiscreteSpace({2}), none), Error);
}

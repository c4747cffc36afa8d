#include <cmath>
#include <set>

#include "csm/data.hpp"
#include "csm/error.hpp"
#include "csm/exact.hpp"
#include "csm/objectives.hpp"
#include "csm/optim.hpp"
#include "csm/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace csm;
using csm::testing::FixedScoreModel;
using doctest::Approx;

namespace {

TabularDistribution random_distribution(const DiscreteSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(space.total_states());
  for (double& v : w) v = 0.05 + rng.uniform();
  return TabularDistribution::from_weights(space, w);
}

FixedScoreModel exact_model(const TabularDistribution& p, const NeighborhoodStructure& s) {
  return FixedScoreModel(s, [p, s](const State& x) { return concrete_score_exact(p, s, x); });
}

FixedScoreModel zero_model(const NeighborhoodStructure& s) {
  return FixedScoreModel(s, [s](const State& x) { return std::vector<double>(s.degree(x), 0.0); });
}

}  // namespace

TEST_CASE("exact csm loss by hand") {
  const DiscreteSpace space({2});
  const TabularDistribution p(space, {0.25, 0.75});
  const auto s = build_structure(StructureKind::Complete, space);
  CHECK(csm_loss_exact(zero_model(s), p).value == Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(csm_loss_exact(exact_model(p, s), p).value == Approx(0.0).epsilon(1e-15));
  const auto j = jcsm_exact(zero_model(s), p);
  CHECK(j.value == 0.0);
}

TEST_CASE("exact csm loss matches a sum taken in reverse order") {
  const DiscreteSpace space({3, 3});
  const auto s = build_structure(StructureKind::Grid, space);
  const auto p = random_distribution(space, 1);
  auto model = FixedScoreModel(s, [s](const State& x) {
    std::vector<double> c;
    for (std::size_t i = 0; i < s.degree(x); ++i) c.push_back(0.1 * (x[0] - x[1]) + 0.05 * i);
    return c;
  });
  double manual = 0.0;
  const auto states = space.enumerate();
  for (auto it = states.rbegin(); it != states.rend(); ++it) {
    const auto c = model.score(*it);
    const auto t = concrete_score_exact(p, s, *it);
    for (std::size_t i = 0; i < c.size(); ++i) manual += p(*it) * (c[i] - t[i]) * (c[i] - t[i]);
  }
  CHECK(csm_loss_exact(model, p).value == Approx(manual).epsilon(1e-13));
}

TEST_CASE("exact objectives differ by a constant") {
  const DiscreteSpace space({4, 3});
  const auto s = build_structure(StructureKind::Grid, space);
  const auto p = random_distribution(space, 2);
  auto shifted = [&](double a) {
    return FixedScoreModel(s, [s, a](const State& x) {
      std::vector<double> c;
      for (std::size_t i = 0; i < s.degree(x); ++i) c.push_back(a * std::sin(1.0 + x[0] + 2.0 * x[1] + i));
      return c;
    });
  };
  const double d_loss = csm_loss_exact(shifted(0.3), p).value - csm_loss_exact(shifted(-0.7), p).value;
  const double d_j = jcsm_exact(shifted(0.3), p).value - jcsm_exact(shifted(-0.7), p).value;
  CHECK(std::abs(d_loss - d_j) < 1e-8);
}

TEST_CASE("jcsm gradient vanishes at the true scores") {
  const DiscreteSpace space({5});
  const auto s = build_structure(StructureKind::Cycle, space);
  const auto p = random_distribution(space, 3);
  LogitTableModel table(space, csm::testing::log_of(p.mass()));
  ImpliedScoreModel model(table, s);
  for (double g : jcsm_exact(model, p).grad) CHECK(std::abs(g) < 1e-6);
}

TEST_CASE("single-state J1 estimates") {
  const auto s = build_structure(StructureKind::Grid, DiscreteSpace({2, 2}));
  auto model = FixedScoreModel(s, [](const State&) { return std::vector<double>{0.5, -0.2}; });
  const std::vector<State> batch{{0, 0}};
  Rng rng(11);
  std::set<double> seen;
  for (int t = 0; t < 200; ++t) {
    const double v = estimate_j1(model, batch, rng).value;
    if (std::abs(v - 2.5) < 1e-12) seen.insert(2.5);
    else if (std::abs(v + 0.72) < 1e-12) seen.insert(-0.72);
    else FAIL("unexpected estimate " << v);
  }
  CHECK(seen.size() == 2);
}

TEST_CASE("J2 estimates by hand") {
  const auto complete = build_structure(StructureKind::Complete, DiscreteSpace({4}));
  auto flat = FixedScoreModel(complete, [](const State&) { return std::vector<double>(3, 0.4); });
  const auto reverse = build_reverse_index(complete);
  Rng rng(12);
  const std::vector<State> one{{2}};
  CHECK(estimate_j2(flat, one, reverse, rng).value == Approx(2.4));

  const auto star = build_structure(StructureKind::Star, DiscreteSpace({6}));
  auto spokes = FixedScoreModel(star, [](const State& x) {
    return x[0] == 0 ? std::vector<double>{} : std::vector<double>{0.1 * x[0]};
  });
  const auto star_rev = build_reverse_index(star);
  const std::vector<State> hubs{{0}};
  for (int t = 0; t < 50; ++t) {
    const double v = estimate_j2(spokes, hubs, star_rev, rng).value;
    const double j = v / 10.0 / 0.1;
    CHECK(std::abs(j - std::round(j)) < 1e-9);
    CHECK(std::round(j) >= 1);
    CHECK(std::round(j) <= 5);
  }
  // Spokes have no sources and are skipped.
  const std::vector<State> leaf{{3}, {0}};
  const auto v = estimate_j2(spokes, leaf, star_rev, rng);
  CHECK(v.meta.skipped == 1);
}

TEST_CASE("structured J2 by hand") {
  const auto cycle = build_structure(StructureKind::Cycle, DiscreteSpace({4}));
  auto model = FixedScoreModel(cycle, [](const State& x) { return std::vector<double>{x[0] == 1 ? 0.3 : 9.0}; });
  Rng rng(13);
  const std::vector<State> batch{{2}};
  CHECK(estimate_j2_structured(model, batch, rng).value == Approx(0.6));

  const auto chain = build_structure(StructureKind::Chain, DiscreteSpace({4}));
  auto ones = FixedScoreModel(chain, [chain](const State& x) { return std::vector<double>(chain.degree(x), 1.0); });
  const std::vector<State> first{{0}};
  CHECK(estimate_j2_structured(ones, first, rng).value == 0.0);
  CHECK_THROWS_AS(estimate_j2_structured(zero_model(build_structure(StructureKind::Star, DiscreteSpace({4}))),
                                         first, rng),
                  Error);
}

TEST_CASE("structured and reverse-index J2 agree in expectation on a cycle") {
  const DiscreteSpace space({91});
  const auto cycle = build_structure(StructureKind::Cycle, space);
  auto model = FixedScoreModel(cycle, [](const State& x) { return std::vector<double>{std::cos(0.2 * x[0])}; });
  const auto reverse = build_reverse_index(cycle);
  Rng rng(14), draw(15);
  double sa = 0, sb = 0, qa = 0, qb = 0;
  const int n = 20000;
  for (int t = 0; t < n; ++t) {
    const std::vector<State> b{{static_cast<int>(draw.uniform_index(91))}};
    const double a = estimate_j2(model, b, reverse, rng).value;
    const double c = estimate_j2_structured(model, b, rng).value;
    sa += a, qa += a * a, sb += c, qb += c * c;
  }
  const double ma = sa / n, mb = sb / n;
  const double se = std::sqrt((qa / n - ma * ma) / n + (qb / n - mb * mb) / n);
  CHECK(std::abs(ma - mb) < 3.0 * se + 1e-12);
}

TEST_CASE("noise kernel") {
  const auto k = make_noise_kernel(0.9, DiscreteSpace({91}));
  CHECK(k.prob(0, 3, 4) == Approx(0.1 / 90.0).epsilon(1e-15));
  CHECK(k.prob(0, 3, 3) == 0.9);
  for (int from : {0, 45, 90}) {
    double s = 0;
    for (double v : k.row(0, from)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  for (double gap : {1e-2, 1e-4, 1e-6}) {
    const auto sharp = make_noise_kernel(1.0 - gap, DiscreteSpace({91}));
    CHECK(sharp.prob(0, 1, 2) == Approx(gap / 90.0).epsilon(1e-9));
  }
  CHECK(make_noise_kernel(1.0 - 8e-5, DiscreteSpace({91})).prob(0, 1, 2) < 1e-6);
  CHECK_THROWS_AS(make_noise_kernel(1.0, DiscreteSpace({3})), Error);
  CHECK_THROWS_AS(make_noise_kernel(0.0, DiscreteSpace({3})), Error);
  const auto two = make_noise_kernel(0.8, DiscreteSpace({3, 4}));
  CHECK(two.joint({0, 0}, {1, 0}) == Approx(0.1 * 0.8));
}

TEST_CASE("dcsm target entries") {
  const DiscreteSpace space({91});
  const auto k = make_noise_kernel(0.9, space);
  const auto grid = build_structure(StructureKind::Grid, space);
  const auto t = kernel_conditional_score(k, grid, {40}, {40});
  REQUIRE(t.size() == 2);
  for (double v : t) CHECK(v == Approx((0.1 / 90.0 - 0.9) / 0.9).epsilon(1e-14));
  CHECK(t[0] == Approx(-0.998765).epsilon(1e-6));
}

TEST_CASE("dcsm loss vanishes at the kernel conditional score") {
  const DiscreteSpace space({6});
  const auto k = make_noise_kernel(0.7, space);
  const auto grid = build_structure(StructureKind::Grid, space);
  // Each clean state is its own target, so the corruption of x must be scored against x itself.
  const std::vector<State> batch{{3}};
  auto oracle = FixedScoreModel(grid, [&](const State& noisy) { return kernel_conditional_score(k, grid, {3}, noisy); });
  Rng rng(16);
  for (int t = 0; t < 20; ++t) CHECK(dcsm_loss(oracle, batch, k, rng).value == Approx(0.0).epsilon(1e-15));
}

TEST_CASE("dcsm minimizer is the perturbed score on two states") {
  const DiscreteSpace space({2});
  const TabularDistribution p(space, {0.3, 0.7});
  const auto k = make_noise_kernel(0.8, space);
  const auto s = build_structure(StructureKind::Complete, space);
  LogitTableModel table(space);
  ImpliedScoreModel model(table, s);
  Adam adam(2, {0.05});
  for (int t = 0; t < 4000; ++t) adam.step(table.parameters(), dcsm_loss_exact(model, p, k).grad);
  const TabularDistribution noisy(space, {0.3 * 0.8 + 0.7 * 0.2, 0.3 * 0.2 + 0.7 * 0.8});
  for (int x = 0; x < 2; ++x) CHECK(model.score({x})[0] == Approx(concrete_score_exact(noisy, s, {x})[0]).epsilon(1e-3));
}

TEST_CASE("ratio matching by hand") {
  const auto space = DiscreteSpace::binary(1);
  LogitTableModel q(space, {0.0, std::log(0.7 / 0.3)});
  const std::vector<State> one{{1}};
  CHECK(ratio_matching_loss(q, one, RatioVariant::Fixed).value == Approx(0.18).epsilon(1e-14));
  CHECK(ratio_matching_loss(q, one, RatioVariant::Original).value == Approx(0.49 + 0.09));
  LogitTableModel perfect(DiscreteSpace({2, 2}), {-40.0, -40.0, -40.0, 0.0});
  const std::vector<State> ones{{1, 1}};
  CHECK(ratio_matching_loss(perfect, ones, RatioVariant::Fixed).value < 1e-30);
}

TEST_CASE("marginalization by hand") {
  const auto space = DiscreteSpace::binary(1);
  LogitTableModel half(space);
  for (int x : {0, 1}) {
    const std::vector<State> b{{x}};
    CHECK(marginalization_loss(half, b, RatioVariant::Fixed).value == Approx(-4.0));
  }
  LogitTableModel q(space, {std::log(0.9), std::log(0.1)});
  const std::vector<State> zero{{0}};
  const double by_hand = 1.0 / 0.81 - 2.0 * (1.0 / 0.9 + 1.0 / 0.1);
  CHECK(by_hand == Approx(-20.9877).epsilon(1e-5));
  CHECK(marginalization_loss(q, zero, RatioVariant::Fixed).value == Approx(by_hand).epsilon(1e-12));
  LogitTableModel spike(space, {0.0, -30.0});
  const auto v = marginalization_loss(spike, zero, RatioVariant::Fixed);
  CHECK(v.meta.clamped == 1);
}

TEST_CASE("original variants cannot see the observed value") {
  // With a single variable there is no context, so the data point drops out entirely.
  const auto space = DiscreteSpace::binary(1);
  LogitTableModel q(space, {0.3, -0.4});
  const std::vector<State> a{{0}}, b{{1}};
  for (auto fn : {&ratio_matching_loss, &marginalization_loss}) {
    const auto va = fn(q, a, RatioVariant::Original), vb = fn(q, b, RatioVariant::Original);
    CHECK(va.value == vb.value);
    CHECK(va.grad == vb.grad);
    CHECK(fn(q, a, RatioVariant::Fixed).value != Approx(fn(q, b, RatioVariant::Fixed).value));
  }
}

TEST_CASE("negative log-likelihood") {
  LogitTableModel uniform(DiscreteSpace({16}));
  const std::vector<State> batch{{0}, {5}, {15}};
  CHECK(nll_loss(uniform, batch).value == Approx(2.7726).epsilon(1e-4));
  const DiscreteSpace space({4});
  const std::vector<State> data{{0}, {0}, {1}, {3}};
  const auto emp = TabularDistribution::empirical(space, data);
  std::vector<double> logits;
  for (double m : emp.mass()) logits.push_back(m > 0 ? std::log(m) : -50.0);
  LogitTableModel mle(space, logits);
  CHECK(nll_loss(mle, data).value == Approx(emp.entropy()).epsilon(1e-12));
}

TEST_CASE("objective names") {
  for (auto k : {ObjectiveKind::CsmExact, ObjectiveKind::CsmMc, ObjectiveKind::CsmStructured, ObjectiveKind::Dcsm,
                 ObjectiveKind::RatioFixed, ObjectiveKind::RatioOriginal, ObjectiveKind::MarginalFixed,
                 ObjectiveKind::MarginalOriginal, ObjectiveKind::Nll}) {
    CHECK(parse_objective(to_string(k)) == k);
  }
  CHECK(needs_density(ObjectiveKind::Nll));
  CHECK_FALSE(needs_density(ObjectiveKind::CsmMc));
  CHECK_THROWS_AS(parse_objective("sm"), Error);
}

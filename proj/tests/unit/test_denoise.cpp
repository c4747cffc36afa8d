#include <cmath>

#include "csm/data.hpp"
#include "csm/denoise.hpp"
#include "csm/error.hpp"
#include "csm/samplers.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace csm;
using doctest::Approx;

namespace {

RatioFn constant_ratio(double r) {
  return [r](const State& y, const State& x) { return y == x ? 1.0 : (y[0] > x[0] ? r : 1.0 / r); };
}

}  // namespace

TEST_CASE("triangular density") {
  const std::vector<double> zero{0.0}, half{0.5}, out{1.2}, pair{0.5, -0.5};
  CHECK(triangular_pdf(zero) == 1.0);
  CHECK(triangular_pdf(half) == 0.5);
  CHECK(triangular_pdf(out) == 0.0);
  CHECK(triangular_pdf(pair) == 0.25);
}

TEST_CASE("perturbation moments") {
  Rng rng(1);
  const State x{3, 7};
  double mean = 0.0, var = 0.0, worst = 0.0;
  const int n = 1000000;
  for (int t = 0; t < n; ++t) {
    const auto y = perturb(x, rng);
    for (std::size_t d = 0; d < 2; ++d) worst = std::max(worst, std::abs(y[d] - x[d]));
    const double u = y[0] - x[0];
    mean += u;
    var += u * u;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(worst <= 1.0);
  CHECK(std::abs(mean) < 0.002);
  CHECK(std::abs(var - 1.0 / 6.0) < 0.002);
}

TEST_CASE("posterior weights by hand") {
  const DiscreteSpace space({10});
  const std::vector<double> at{2.3};
  const auto flat = posterior_weights(at, constant_ratio(1.0), space);
  REQUIRE(flat.corners.size() == 2);
  CHECK(flat.corners[0] == State{2});
  CHECK(flat.weights[0] == Approx(0.7));
  CHECK(flat.weights[1] == Approx(0.3));
  const auto tilted = posterior_weights(at, constant_ratio(2.0), space);
  CHECK(tilted.weights[0] == Approx(7.0 / 13.0));
  CHECK(tilted.weights[1] == Approx(6.0 / 13.0));
  const std::vector<double> integer{4.0};
  const auto exact = posterior_weights(integer, constant_ratio(5.0), space);
  REQUIRE(exact.corners.size() == 1);
  CHECK(exact.corners[0] == State{4});
  CHECK(exact.weights[0] == 1.0);
}

TEST_CASE("posterior weights in two dimensions match Bayes") {
  const DiscreteSpace space({3, 3});
  const auto p = TabularDistribution::from_weights(space, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const std::vector<double> noisy{0.6, 1.25};
  const auto post = posterior_weights(noisy, ratio_fn_from_distribution(p), space);
  REQUIRE(post.corners.size() == 4);
  const double density = perturbed_density(p, noisy);
  for (std::size_t k = 0; k < 4; ++k) {
    const State& y = post.corners[k];
    const std::vector<double> u{noisy[0] - y[0], noisy[1] - y[1]};
    CHECK(post.weights[k] == Approx(p(y) * triangular_pdf(u) / density).epsilon(1e-12));
  }
}

TEST_CASE("a corner with no mass does not break the posterior") {
  const DiscreteSpace space({4});
  const TabularDistribution p(space, {0.0, 0.5, 0.5, 0.0});
  const std::vector<double> noisy{0.4};
  const auto post = posterior_weights(noisy, ratio_fn_from_distribution(p), space);
  CHECK(post.weights[0] == 0.0);
  CHECK(post.weights[1] == 1.0);
  Rng rng(2);
  CHECK(denoise_sample(noisy, ratio_fn_from_distribution(p), space, rng) == State{1});
}

TEST_CASE("recovered Stein scores") {
  const DiscreteSpace space({10});
  const std::vector<double> mid{3.5};
  CHECK(recover_stein_score(mid, constant_ratio(1.0), space)[0] == Approx(0.0));
  CHECK(recover_stein_score(mid, constant_ratio(2.0), space)[0] == Approx(2.0 / 3.0));
}

TEST_CASE("recovered Stein scores match finite differences of the perturbed density") {
  const auto p = toy_1d_distribution();
  const auto ratio = ratio_fn_from_distribution(p);
  for (double x : {0.2, 2.7, 7.5, 11.9, 14.05}) {
    const double h = 1e-6;
    const std::vector<double> a{x + h}, b{x - h}, at{x};
    const double fd = (std::log(perturbed_density(p, a)) - std::log(perturbed_density(p, b))) / (2 * h);
    CHECK(recover_stein_score(at, ratio, p.space())[0] == Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("denoising integers is deterministic") {
  const DiscreteSpace space({5, 5});
  Rng rng(3);
  const std::vector<double> noisy{2.0, 4.0};
  for (int t = 0; t < 10; ++t) CHECK(denoise_sample(noisy, constant_ratio(3.0), space, rng) == State{2, 4});
}

TEST_CASE("denoising a perturbed sample recovers p") {
  const auto p = toy_1d_distribution();
  const auto ratio = ratio_fn_from_distribution(p);
  Rng rng(4);
  const auto data = gen_1d_toy(200000, 5);
  std::vector<State> back;
  for (const State& x : data.samples) back.push_back(denoise_sample(perturb(x, rng), ratio, p.space(), rng));
  CHECK(kl_and_tv(TabularDistribution::empirical(p.space(), back), p).tv < 0.01);
}

TEST_CASE("Langevin on the recovered score then denoising matches the toy") {
  const auto p = toy_1d_distribution();
  const auto ratio = ratio_fn_from_distribution(p);
  const auto& space = p.space();
  const VectorFn score = [&](std::span<const double> x) { return recover_stein_score(x, ratio, space); };
  LangevinOptions opt;
  opt.burn_in = 4000;
  opt.thin = 100;
  opt.domain = [](std::span<const double> x) { return x[0] > -1.0 && x[0] < 16.0; };
  Rng rng(6);
  std::vector<State> out;
  for (int chain = 0; chain < 400; ++chain) {
    const std::vector<double> init{static_cast<double>(rng.uniform_index(16))};
    for (const auto& x : langevin(score, init, 0.02, 24000, rng, opt)) out.push_back(denoise_sample(x, ratio, space, rng));
  }
  CHECK(kl_and_tv(TabularDistribution::empirical(space, out), p).tv < 0.03);
}

TEST_CASE("ratios from scores agree with the distribution") {
  const auto p = toy_1d_distribution();
  LogitTableModel table(p.space(), csm::testing::log_of(p.mass()));
  ImpliedScoreModel model(table, build_structure(StructureKind::Grid, p.space()));
  const auto from_scores = ratio_fn_from_scores(model);
  const auto direct = ratio_fn_from_distribution(p);
  for (int a = 0; a < 16; ++a) CHECK(from_scores({a}, {3}) == Approx(direct({a}, {3})).epsilon(1e-10));
}

TEST_CASE("denoising rejects bad input") {
  const DiscreteSpace space({4});
  const std::vector<double> nan{std::nan("")}, wrong{1.0, 2.0}, far{9.5};
  CHECK_THROWS_AS(posterior_weights(nan, constant_ratio(1.0), space), NumericError);
  CHECK_THROWS_AS(posterior_weights(wrong, constant_ratio(1.0), space), Error);
  CHECK_THROWS_AS(posterior_weights(far, constant_ratio(1.0), space), NumericError);
}

#include <cmath>
#include <filesystem>
#include <numbers>

#include "csm/autodiff.hpp"
#include "csm/error.hpp"
#include "csm/models.hpp"
#include "csm/objectives.hpp"
#include "csm/optim.hpp"
#include "csm/rng.hpp"
#include "doctest.h"

using namespace csm;
using doctest::Approx;

namespace {

// Checks the tape gradient of a scalar function of three inputs.
void check_op(const std::function<ad::Var(ad::Var)>& f, std::vector<double> x) {
  auto eval = [&](std::vector<double>& params) {
    ad::Tape tape(params);
    return ad::sum(f(tape.param(0, params.size()))).value();
  };
  ad::Tape tape(x);
  const ad::Var out = ad::sum(f(tape.param(0, x.size())));
  tape.backward(out);
  const std::vector<double> analytic(tape.param_grad().begin(), tape.param_grad().end());
  const auto r = gradient_check([&] { return eval(x); }, x, analytic, 1e-6);
  CHECK(r.max_rel_error < 1e-6);
}

}  // namespace

TEST_CASE("tape gradients match finite differences for every op") {
  const std::vector<double> x{0.3, -0.7, 1.1};
  check_op([](ad::Var v) { return v * v + 2.0 * v - v / 3.0; }, x);
  check_op([](ad::Var v) { return ad::exp(v) + ad::expm1(v) + ad::tanh(v) + ad::softplus(v); }, x);
  check_op([](ad::Var v) { return ad::log(ad::square(v) + 1.0) + 1.0 / (v + 2.0); }, x);
  check_op([](ad::Var v) { return ad::mean(v) * ad::dot(v, v) - (-v); }, x);
  check_op([](ad::Var v) { return 2.0 * ad::log_sum_exp(v) + ad::at(ad::log_softmax(v), 1); }, x);
  check_op(
      [](ad::Var v) {
        const std::vector<std::size_t> idx{2, 0, 2};
        return ad::gather(v, idx) * ad::at(v, 0);
      },
      x);
  check_op(
      [](ad::Var v) {
        const std::vector<ad::Var> parts{v, ad::exp(v)};
        return ad::concat(parts) - 1.0;
      },
      x);
}

TEST_CASE("masked matvec and add_all gradients") {
  std::vector<double> params{0.2, -0.4, 0.9, 1.3, -0.8, 0.5, 0.7, -1.2};
  const auto mask = std::make_shared<const std::vector<double>>(std::vector<double>{1, 0, 1, 1, 0, 1});
  auto build = [&](ad::Tape& tape) {
    const ad::Var w = tape.param(0, 6);
    const ad::Var x = tape.param(6, 2);
    const ad::Var y = ad::matvec(w, 3, 2, x, mask);
    const std::vector<ad::Var> terms{ad::sum(ad::tanh(y)), ad::dot(x, x)};
    return ad::add_all(terms);
  };
  ad::Tape tape(params);
  const ad::Var out = build(tape);
  tape.backward(out);
  CHECK(tape.param_grad()[1] == 0.0);  // masked weight
  CHECK(tape.param_grad()[4] == 0.0);
  const std::vector<double> g(tape.param_grad().begin(), tape.param_grad().end());
  const auto r = gradient_check(
      [&] {
        ad::Tape t(params);
        return build(t).value();
      },
      params, g, 1e-6);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("clamp_min counts and blocks gradients") {
  std::vector<double> params{-2.0, 0.5};
  ad::Tape tape(params);
  std::size_t clamped = 0;
  const ad::Var out = ad::sum(ad::clamp_min(tape.param(0, 2), 0.0, &clamped));
  tape.backward(out);
  CHECK(clamped == 1);
  CHECK(out.value() == 0.5);
  CHECK(tape.param_grad()[0] == 0.0);
  CHECK(tape.param_grad()[1] == 1.0);
}

TEST_CASE("implied scores of logit tables") {
  const DiscreteSpace space({2});
  LogitTableModel uniform(space);
  const auto complete = build_structure(StructureKind::Complete, space);
  CHECK(implied_concrete_score(uniform, complete, {0}) == std::vector<double>{0.0});
  LogitTableModel skewed(space, {0.0, std::log(3.0)});
  CHECK(implied_concrete_score(skewed, complete, {0})[0] == Approx(2.0).epsilon(1e-14));
  ImpliedScoreModel view(skewed, complete);
  CHECK(view.score({1})[0] == Approx(-2.0 / 3.0));
  CHECK(view.score_entry({0}, 0) == Approx(2.0));
  CHECK(&view.parameters() == &skewed.parameters());
}

TEST_CASE("log masses") {
  LogitTableModel uniform(DiscreteSpace({16}));
  for (int i = 0; i < 16; ++i) CHECK(log_mass(uniform, {i}) == Approx(-std::log(16.0)).epsilon(1e-14));
  MaskedARModel ar(8, {{16}, true, 3});
  std::fill(ar.parameters().begin(), ar.parameters().end(), 0.0);
  CHECK(log_mass(ar, State(8, 1)) == Approx(-8.0 * std::numbers::ln2).epsilon(1e-14));
  CHECK(ar.log_partition() == 0.0);
}

TEST_CASE("masked autoregressive models normalize and respect the ordering") {
  MaskedARModel ar(5, {{12, 12}, true, 11});
  Rng rng(5);
  for (double& p : ar.parameters()) p = rng.normal();
  double total = 0.0;
  for (const State& x : ar.space().enumerate()) total += std::exp(ar.log_q(x));
  CHECK(total == Approx(1.0).epsilon(1e-12));
  // Logit d may only read x_0..x_{d-1}.
  for (const State& x : ar.space().enumerate()) {
    const auto base = ar.logits(x);
    for (std::size_t j = 0; j < 5; ++j) {
      State y = x;
      y[j] = 1 - y[j];
      const auto moved = ar.logits(y);
      for (std::size_t d = 0; d <= j; ++d) CHECK(moved[d] == base[d]);
    }
  }
}

TEST_CASE("conditionals of a logit table match its joint") {
  LogitTableModel table(DiscreteSpace({3, 4}));
  Rng rng(9);
  for (double& l : table.parameters()) l = rng.normal();
  const auto p = table.distribution();
  const State x{1, 2};
  const auto cond = table.conditional_log_probs(x, 1);
  double z = 0.0;
  for (int v = 0; v < 4; ++v) z += p({1, v});
  for (int v = 0; v < 4; ++v) CHECK(std::exp(cond[v]) == Approx(p({1, v}) / z));
  const auto generic = table.DensityModel::conditional_log_probs(x, 1);
  for (int v = 0; v < 4; ++v) CHECK(generic[v] == Approx(cond[v]));
}

TEST_CASE("score networks emit one output per present slot") {
  const auto grid = build_structure(StructureKind::Grid, DiscreteSpace({5, 5}));
  ScoreNetModel net(grid, {{8}, InputEncoding::Affine, 4});
  const auto slots = net.slot_outputs({0, 0});
  REQUIRE(slots.size() == 4);
  const auto c = net.score({0, 0});
  REQUIRE(c.size() == 2);
  CHECK(c[0] == slots[0]);
  CHECK(c[1] == slots[2]);
  CHECK(net.encode({0, 4}) == std::vector<double>{-1.0, 1.0});
  ScoreNetModel onehot(grid, {{8}, InputEncoding::OneHot, 4});
  CHECK(onehot.encode({1, 3}).size() == 10);
}

TEST_CASE("adam") {
  std::vector<double> params{1.0, -2.0};
  Adam zero(2, {0.1});
  const std::vector<double> nothing{0.0, 0.0};
  zero.step(params, nothing);
  CHECK(params == std::vector<double>{1.0, -2.0});

  // The first bias-corrected step moves each coordinate by lr against the gradient sign.
  Adam adam(2, {0.1});
  const std::vector<double> g{3.0, -0.5};
  adam.step(params, g);
  CHECK(params[0] == Approx(0.9).epsilon(1e-8));
  CHECK(params[1] == Approx(-1.9).epsilon(1e-8));

  const std::vector<double> bad{0.0, std::nan("")};
  try {
    adam.step(params, bad);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("parameter 1") != std::string::npos);
  }
  CHECK(adam.steps() == 1);
  CHECK_THROWS_AS(Adam(2, {-1.0}), Error);
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<double> x{3.0, -4.0};
  Adam adam(2, {0.05});
  for (int t = 0; t < 3000; ++t) {
    const std::vector<double> g{2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)};
    adam.step(x, g);
  }
  CHECK(x[0] == Approx(1.0).epsilon(1e-3));
  CHECK(x[1] == Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("gradient check on a logit table with the exact csm loss") {
  const DiscreteSpace space({4, 4});
  const auto grid = build_structure(StructureKind::Grid, space);
  Rng rng(3);
  std::vector<double> w(16);
  for (double& v : w) v = 0.1 + rng.uniform();
  const auto p = TabularDistribution::from_weights(space, w);
  LogitTableModel table(space);
  for (double& l : table.parameters()) l = rng.normal();
  ImpliedScoreModel model(table, grid);
  const auto v = csm_loss_exact(model, p);
  const auto r = gradient_check([&] { return csm_loss_exact(model, p).value; }, table.parameters(), v.grad);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.checked == 16);
}

TEST_CASE("gradient check of a constant loss") {
  std::vector<double> params{1.0, 2.0, 3.0};
  const std::vector<double> zeros(3, 0.0);
  const auto r = gradient_check([] { return 4.2; }, params, zeros);
  CHECK(r.max_rel_error == 0.0);
  CHECK(params == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("gradient check flags a wrong gradient and subsamples coordinates") {
  std::vector<double> params(10, 0.5);
  auto f = [&] {
    double s = 0.0;
    for (double v : params) s += v * v;
    return s;
  };
  std::vector<double> g(10, 1.0);
  g[4] = 0.0;
  const auto all = gradient_check(f, params, g);
  CHECK(all.max_rel_error == Approx(1.0));
  CHECK(all.worst_index == 4);
  const auto some = gradient_check(f, params, g, 1e-5, 3);
  CHECK(some.checked == 3);
}

TEST_CASE("checkpoints round-trip every model kind") {
  const auto grid = build_structure(StructureKind::Grid, DiscreteSpace({4, 3}), Boundary::Wrap);
  Checkpoint ck;
  ck.models.emplace_back(LogitTableModel(DiscreteSpace({4, 3}), std::vector<double>(12, 0.25)));
  ck.models.emplace_back(ScoreNetModel(grid, {{6, 5}, InputEncoding::OneHot, 8}));
  ck.models.emplace_back(MaskedARModel(6, {{7}, false, 2}));
  ck.meta["note"] = "x";
  const auto back = decode_checkpoint(encode_checkpoint(ck));
  REQUIRE(back.models.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(model_kind(back.models[k]) == model_kind(ck.models[k]));
    CHECK(model_parameters(back.models[k]) == model_parameters(ck.models[k]));
  }
  const auto& net = std::get<ScoreNetModel>(back.models[1]);
  CHECK(net.structure().boundary() == Boundary::Wrap);
  CHECK(net.score({3, 2}) == std::get<ScoreNetModel>(ck.models[1]).score({3, 2}));
  CHECK(back.meta["note"] == "x");
  CHECK(as_density(back.models[1]) == nullptr);

  const auto path = (std::filesystem::temp_directory_path() / "csm_unit_checkpoint.bin").string();
  save_checkpoint(path, ck);
  CHECK(model_parameters(load_checkpoint(path).models[2]) == model_parameters(ck.models[2]));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(decode_checkpoint("not a checkpoint"), Error);
  auto bytes = encode_checkpoint(ck);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_checkpoint(bytes), Error);
}

TEST_CASE("structures round-trip through json") {
  const auto s = build_explicit_structure(DiscreteSpace({3}), {{{0}, {2}}, {{2}, {1}}});
  const auto back = structure_from_json(structure_to_json(s));
  CHECK(back.kind() == StructureKind::Explicit);
  CHECK(back.neighbors({0}) == std::vector<State>{{2}});
  CHECK(back.neighbors({1}).empty());
}

#include "csm/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "csm/data.hpp"
#include "csm/denoise.hpp"
#include "csm/error.hpp"
#include "csm/exact.hpp"
#include "csm/graphs.hpp"
#include "csm/models.hpp"
#include "csm/objectives.hpp"
#include "csm/optim.hpp"
#include "csm/samplers.hpp"
#include "csm/train.hpp"

namespace csm {

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CheckResult make_result(std::string name, double measured, double tolerance, const std::string& relation,
                        std::string detail, double seconds) {
  CheckResult r;
  r.name = std::move(name);
  r.measured = measured;
  r.tolerance = tolerance;
  r.relation = relation;
  r.passed = relation == "<" ? measured < tolerance : measured >= tolerance;  // NaN fails both ways
  r.detail = std::move(detail);
  r.seconds = seconds;
  return r;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

TabularDistribution random_distribution(const DiscreteSpace& space, Rng& rng, double scale) {
  std::vector<double> w(space.total_states());
  for (double& v : w) v = std::exp(scale * rng.normal());
  return TabularDistribution::from_weights(space, std::move(w));
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

std::vector<State> draw(const TabularDistribution& p, std::size_t n, Rng& rng) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = (acc += p.at(i));
  std::vector<State> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform());
    out.push_back(p.space().state(std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1)));
  }
  return out;
}

// Largest TV between matching conditionals of two all_conditionals() lists.
double max_line_tv(std::span<const double> a, std::span<const double> b, std::size_t line) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); i += line) {
    worst = std::max(worst, total_variation(a.subspan(i, line), b.subspan(i, line)));
  }
  return worst;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// J1 and J2 by enumeration, the targets of the Monte Carlo estimators.
std::pair<double, double> enumerated_j(const ScoreModel& model, const TabularDistribution& p) {
  double j1 = 0.0, j2 = 0.0;
  const auto& s = model.structure();
  for (const State& x : p.space().enumerate()) {
    const auto c = model.score(x);
    const auto nbrs = s.neighbors(x);
    for (std::size_t i = 0; i < c.size(); ++i) {
      j1 += p(x) * (c[i] * c[i] + 2.0 * c[i]);
      j2 += 2.0 * p(nbrs[i]) * c[i];
    }
  }
  return {j1, j2};
}

ObjectiveValue on_tape(const ScoreModel& model, const std::function<ad::Var(ad::Tape&, ObjectiveMeta&)>& build) {
  ObjectiveValue out;
  ad::Tape tape(model.parameters());
  ad::Var v = build(tape, out.meta);
  tape.backward(v);
  out.value = v.value();
  out.grad.assign(tape.param_grad().begin(), tape.param_grad().end());
  return out;
}

// The toy-model fit shared by the consistency, sampling and denoising checks.
LogitTableModel fit_toy_table(std::uint64_t seed) {
  Dataset data = gen_1d_toy(1000, seed);
  AnyModel model = LogitTableModel(data.space);
  TrainOptions opts;
  opts.objective = ObjectiveKind::CsmExact;
  opts.iterations = 10000;
  opts.log_every = opts.iterations;
  opts.adam.lr = 5e-4;
  opts.seed = seed;
  opts.exact_target = data.truth;
  train_model(model, build_structure(StructureKind::Cycle, data.space), data, opts);
  return std::get<LogitTableModel>(std::move(model));
}

// Every conditional q(. | x without d) of a 2-D table, line by line.
std::vector<double> all_conditionals(const LogitTableModel& model) {
  std::vector<double> out;
  const auto& space = model.space();
  for (std::size_t d = 0; d < space.num_dims(); ++d) {
    for (const State& x : space.enumerate()) {
      if (x[d] != 0) continue;
      for (double lp : model.conditional_log_probs(x, d)) out.push_back(std::exp(lp));
    }
  }
  return out;
}

}  // namespace

std::vector<CheckResult> check_completeness(std::uint64_t seed) {
  const std::vector<DiscreteSpace> spaces{DiscreteSpace({64}), DiscreteSpace({8, 8}), DiscreteSpace({4, 4, 4}),
                                          DiscreteSpace::binary(6), DiscreteSpace({5, 7})};
  const std::vector<StructureKind> kinds{StructureKind::Chain, StructureKind::Cycle, StructureKind::Star,
                                         StructureKind::Grid, StructureKind::Complete};
  std::vector<double> worst(kinds.size(), 0.0);
  std::vector<double> elapsed(kinds.size(), 0.0);
  Rng rng(seed, 0xc1);
  for (std::size_t k = 0; k < 50; ++k) {
    const DiscreteSpace& space = spaces[k % spaces.size()];
    const TabularDistribution p = random_distribution(space, rng, 1.5);
    for (std::size_t j = 0; j < kinds.size(); ++j) {
      Stopwatch sw;
      const auto s = build_structure(kinds[j], space);
      const auto rec = reconstruct_density([&](const State& x) { return concrete_score_exact(p, s, x); }, s);
      worst[j] = std::max(worst[j], max_abs_diff(rec.distribution.mass(), p.mass()));
      elapsed[j] += sw.seconds();
    }
  }
  std::vector<CheckResult> out;
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    out.push_back(make_result("completeness/" + to_string(kinds[j]), worst[j], 1e-10, "<",
                              "max |p_rec - p| over 50 distributions", elapsed[j]));
  }
  return out;
}

std::vector<CheckResult> check_equivalence(std::uint64_t seed) {
  Stopwatch sw;
  const std::vector<DiscreteSpace> spaces{DiscreteSpace({12}), DiscreteSpace({3, 4}), DiscreteSpace({2, 2, 3}),
                                          DiscreteSpace({16}), DiscreteSpace({4, 4})};
  const std::vector<StructureKind> kinds{StructureKind::Chain, StructureKind::Grid, StructureKind::Complete,
                                         StructureKind::Cycle, StructureKind::Star};
  Rng rng(seed, 0xe9);
  double worst = 0.0;
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < 10; ++k) {
    const DiscreteSpace& space = spaces[k % spaces.size()];
    const auto s = build_structure(kinds[(k / 2) % kinds.size()], space);
    const TabularDistribution p = random_distribution(space, rng, 1.0);
    LogitTableModel table(space);
    ImpliedScoreModel implied(table, s);
    ScoreNetModel net(s, ScoreNetConfig{{8}, InputEncoding::Affine, seed + k});
    ScoreModel& model = k % 2 == 0 ? static_cast<ScoreModel&>(net) : implied;
    const std::vector<double> base = model.parameters();
    auto both = [&](const std::vector<double>& theta) {
      model.parameters() = theta;
      return std::pair{csm_loss_exact(model, p).value, jcsm_exact(model, p).value};
    };
    for (std::size_t t = 0; t < 10; ++t) {
      std::vector<double> a = base, b = base;
      for (double& v : a) v += 0.5 * rng.normal();
      for (double& v : b) v += 0.5 * rng.normal();
      const auto [la, ja] = both(a);
      const auto [lb, jb] = both(b);
      worst = std::max(worst, std::abs((lb - la) - (jb - ja)));
      ++pairs;
    }
  }
  return {make_result("equivalence/delta_L_vs_delta_J", worst, 1e-8, "<",
                      std::to_string(pairs) + " parameter pairs on 10 instances", sw.seconds())};
}

std::vector<CheckResult> check_estimators(std::uint64_t seed) {
  struct Case {
    std::string name;
    StructureKind kind;
    DiscreteSpace space;
    Boundary boundary;
    bool structured;
  };
  const std::vector<Case> cases{
      {"chain", StructureKind::Chain, DiscreteSpace({50}), Boundary::Drop, true},
      {"cycle", StructureKind::Cycle, DiscreteSpace({91}), Boundary::Drop, true},
      {"star", StructureKind::Star, DiscreteSpace({20}), Boundary::Drop, false},
      {"grid_drop", StructureKind::Grid, DiscreteSpace({10, 10}), Boundary::Drop, true},
      {"grid_wrap", StructureKind::Grid, DiscreteSpace({4, 5, 5}), Boundary::Wrap, true},
  };
  constexpr std::size_t kBatch = 100;
  constexpr std::size_t kReps = 1000;
  std::vector<CheckResult> out;
  Rng rng(seed, 0xe5);
  for (const Case& c : cases) {
    const auto s = build_structure(c.kind, c.space, c.boundary);
    const TabularDistribution p = random_distribution(c.space, rng, 1.0);
    LogitTableModel table(c.space, random_vector(c.space.total_states(), rng, 0.5));
    ImpliedScoreModel model(table, s);
    const auto [j1, j2] = enumerated_j(model, p);
    const ReverseIndex reverse = ReverseIndex::tabulate(s);

    using Estimator = std::function<double(std::span<const State>, Rng&)>;
    std::vector<std::pair<std::string, Estimator>> estimators{
        {"j1", [&](std::span<const State> b, Rng& r) { return estimate_j1(model, b, r).value; }},
        {"j2", [&](std::span<const State> b, Rng& r) { return estimate_j2(model, b, reverse, r).value; }},
    };
    if (c.structured) {
      estimators.emplace_back("j2_structured", [&](std::span<const State> b, Rng& r) {
        return estimate_j2_structured(model, b, r).value;
      });
    }
    for (const auto& [label, estimate] : estimators) {
      Stopwatch sw;
      const double exact = label == "j1" ? j1 : j2;
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t rep = 0; rep < kReps; ++rep) {
        const auto batch = draw(p, kBatch, rng);
        const double v = estimate(batch, rng);
        sum += v;
        sum2 += v * v;
      }
      const double mean = sum / kReps;
      const double var = std::max(0.0, (sum2 - kReps * mean * mean) / (kReps - 1));
      const double se = std::sqrt(var / kReps);
      const double z = se > 0.0 ? std::abs(mean - exact) / se : (mean == exact ? 0.0 : INFINITY);
      out.push_back(make_result("estimators/" + c.name + "/" + label, z, 3.0, "<",
                                "mean " + fmt(mean) + " exact " + fmt(exact) + " se " + fmt(se) + " over " +
                                    std::to_string(kBatch * kReps) + " draws",
                                sw.seconds()));
    }
  }
  return out;
}

std::vector<CheckResult> check_consistency(std::uint64_t seed) {
  Stopwatch sw;
  const LogitTableModel model = fit_toy_table(seed);
  const double tv = total_variation(model.distribution().mass(), toy_1d_distribution().mass());
  return {make_result("consistency/toy1d_tv", tv, 0.02, "<", "10000 Adam steps, lr 5e-4, cycle structure",
                      sw.seconds())};
}

std::vector<CheckResult> check_mh(std::uint64_t seed) {
  Stopwatch sw;
  LogitTableModel table = fit_toy_table(seed);
  // A complete graph keeps every proposal reversible; see the README.
  ImpliedScoreModel model(table, build_structure(StructureKind::Complete, table.space()));
  Rng rng(seed, 0x3c);
  ChainStats stats;
  const auto samples = run_chain(model, State{0}, 100000, 10000, 1, rng, &stats);
  const auto hist = TabularDistribution::empirical(table.space(), samples);
  const double tv = total_variation(hist.mass(), table.distribution().mass());
  return {make_result("mh/toy1d_tv", tv, 0.02, "<",
                      std::to_string(samples.size()) + " samples, acceptance " + fmt(stats.acceptance_rate()),
                      sw.seconds())};
}

std::vector<CheckResult> check_stein_limit(std::uint64_t /*seed*/) {
  Stopwatch sw;
  const std::vector<double> mu{0.2, -0.1}, sigma{1.0, 0.7};
  const DensityFn density = [&](std::span<const double> x) {
    double e = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) e += std::pow((x[d] - mu[d]) / sigma[d], 2);
    return std::exp(-0.5 * e);
  };
  const std::vector<std::vector<double>> points{{0.9, 0.4}, {-0.6, -0.8}, {1.3, -0.2}};
  auto error_at = [&](double delta) {
    double e = 0.0;
    for (const auto& x : points) {
      const auto s = scaled_score_limit(density, x, delta);
      for (std::size_t d = 0; d < x.size(); ++d) {
        e = std::max(e, std::abs(s[d] + (x[d] - mu[d]) / (sigma[d] * sigma[d])));
      }
    }
    return e;
  };
  const double e1 = error_at(0.1), e2 = error_at(0.05), e3 = error_at(0.025);
  const double r1 = e1 / e2, r2 = e2 / e3;
  const double dev = std::max(std::abs(r1 - 2.0), std::abs(r2 - 2.0)) / 2.0;
  return {make_result("stein_limit/halving", dev, 0.3, "<",
                      "errors " + fmt(e1) + ", " + fmt(e2) + ", " + fmt(e3) + "; ratios " + fmt(r1) + ", " + fmt(r2),
                      sw.seconds())};
}

std::vector<CheckResult> check_dcsm_fixed_point(std::uint64_t seed) {
  Stopwatch sw;
  const TabularDistribution p = toy_1d_distribution();
  const auto s = build_structure(StructureKind::Cycle, p.space());
  const NoiseKernel kernel(p.space(), 0.9);

  std::vector<double> noisy(p.size(), 0.0);
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t b = 0; b < p.size(); ++b) {
      noisy[b] += p.at(a) * kernel.joint(p.space().state(a), p.space().state(b));
    }
  }
  const TabularDistribution perturbed(p.space(), noisy);

  Rng rng(seed, 0xd7);
  LogitTableModel table(p.space(), random_vector(p.size(), rng, 0.1));
  ImpliedScoreModel model(table, s);
  Adam adam(table.parameters().size(), AdamConfig{0.01});
  for (int it = 0; it < 3000; ++it) adam.step(table.parameters(), dcsm_loss_exact(model, p, kernel).grad);

  double worst = 0.0;
  for (const State& x : p.space().enumerate()) {
    worst = std::max(worst, max_abs_diff(model.score(x), concrete_score_exact(perturbed, s, x)));
  }
  return {make_result("dcsm/fixed_point", worst, 1e-3, "<", "3000 Adam steps, lr 0.01, w = 0.9", sw.seconds())};
}

std::vector<CheckResult> check_denoise(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const TabularDistribution p = toy_1d_distribution();
  const DiscreteSpace& space = p.space();

  {
    Stopwatch sw;
    const RatioFn ratio = ratio_fn_from_distribution(p);
    Rng rng(seed, 0xa3);
    constexpr double h = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double x = -1.0 + static_cast<double>(rng.uniform_index(17)) + 0.01 + 0.98 * rng.uniform();
      const double lo[1] = {x - h}, hi[1] = {x + h}, at[1] = {x};
      const double fd = (std::log(perturbed_density(p, hi)) - std::log(perturbed_density(p, lo))) / (2.0 * h);
      worst = std::max(worst, std::abs(recover_stein_score(at, ratio, space)[0] - fd));
    }
    out.push_back(make_result("denoise/stein_vs_oracle", worst, 1e-6, "<",
                              "100 points, central difference of log of the convolved density", sw.seconds()));
  }

  Stopwatch sw;
  LogitTableModel table = fit_toy_table(seed);
  ImpliedScoreModel model(table, build_structure(StructureKind::Cycle, space));
  const RatioFn ratio = ratio_fn_from_scores(model);
  const VectorFn score = [&](std::span<const double> x) { return recover_stein_score(x, ratio, space); };
  LangevinOptions opts;
  opts.burn_in = 8000;
  opts.thin = 200;
  opts.domain = [](std::span<const double> x) { return x[0] > -1.0 && x[0] < 16.0; };
  std::vector<State> denoised;
  for (std::uint64_t c = 0; c < 400; ++c) {
    Rng rng(seed, 0x1000 + c);
    const auto traj = langevin(score, {-0.5 + 16.0 * rng.uniform()}, 0.02, 40000, rng, opts);
    for (const auto& x : traj) denoised.push_back(denoise_sample(x, ratio, space, rng));
  }
  const auto hist = TabularDistribution::empirical(space, denoised);
  out.push_back(make_result("denoise/pipeline_tv", total_variation(hist.mass(), p.mass()), 0.03, "<",
                            std::to_string(denoised.size()) + " denoised samples from 400 Langevin chains",
                            sw.seconds()));
  return out;
}

std::vector<CheckResult> check_degeneracy(std::uint64_t seed) {
  Stopwatch sw;
  const Dataset board = gen_2d_toy("checkerboard", 100000, 91, seed);
  const Dataset spirals = gen_2d_toy("spirals", 100000, 91, seed + 1);
  const Dataset held = gen_2d_toy("checkerboard", 20000, 91, seed + 2);
  const auto s = build_structure(StructureKind::Grid, board.space);

  auto fit = [&](const Dataset& data, ObjectiveKind kind, double lr) {
    AnyModel model = LogitTableModel(data.space);
    TrainOptions opts;
    opts.objective = kind;
    opts.iterations = 2000;
    opts.log_every = opts.iterations;
    opts.batch_size = 256;
    opts.adam.lr = lr;
    opts.seed = seed;
    train_model(model, s, data, opts);
    return std::get<LogitTableModel>(std::move(model));
  };
  // The original objective is nearly flat around its minimizer, and Adam's
  // per-coordinate scaling turns round-off gradients there into an lr-sized
  // random walk, so it gets a tenth of the step size.
  const LogitTableModel orig_board = fit(board, ObjectiveKind::RatioOriginal, 0.005);
  const LogitTableModel orig_spirals = fit(spirals, ObjectiveKind::RatioOriginal, 0.005);
  const LogitTableModel fixed_board = fit(board, ObjectiveKind::RatioFixed, 0.05);
  const LogitTableModel fixed_spirals = fit(spirals, ObjectiveKind::RatioFixed, 0.05);

  const auto cb = all_conditionals(orig_board);
  const auto cs = all_conditionals(orig_spirals);
  const std::vector<double> uniform(cb.size(), 1.0 / 91.0);
  const double fixed_gap = max_line_tv(all_conditionals(fixed_board), all_conditionals(fixed_spirals), 91);

  auto heldout_ll = [&](const LogitTableModel& m) {
    double ll = 0.0;
    for (const State& x : held.samples) ll += log_mass(m, x);
    return ll / static_cast<double>(held.samples.size());
  };
  const double ll_fixed = heldout_ll(fixed_board);
  const double ll_orig = heldout_ll(orig_board);
  const double t = sw.seconds() / 4.0;

  return {
      make_result("degeneracy/original_identical", max_line_tv(cb, cs, 91), 1e-6, "<",
                  "max TV between conditionals, checkerboard vs spirals", t),
      make_result("degeneracy/original_uniform", std::max(max_line_tv(cb, uniform, 91), max_line_tv(cs, uniform, 91)),
                  1e-6, "<", "max TV from the uniform conditional", t),
      make_result("degeneracy/fixed_dataset_dependent", fixed_gap, 0.05, ">=",
                  "max TV between conditionals, checkerboard vs spirals", t),
      make_result("degeneracy/fixed_heldout_gain", ll_fixed - ll_orig, 0.5, ">=",
                  "held-out LL " + fmt(ll_fixed) + " vs " + fmt(ll_orig) + " nats", t),
  };
}

std::vector<CheckResult> check_sampling_2d(std::uint64_t seed) {
  Stopwatch sw;
  const Dataset data = gen_2d_toy("checkerboard", 1000000, 91, seed);
  const auto s = build_structure(StructureKind::Grid, data.space);
  AnyModel model = LogitTableModel(data.space);
  TrainOptions opts;
  opts.objective = ObjectiveKind::CsmMc;
  opts.iterations = 1500;
  opts.log_every = opts.iterations;
  opts.batch_size = 1024;
  opts.adam.lr = 0.003;
  opts.seed = seed;
  try {
    train_model(model, s, data, opts);
  } catch (const NumericError& e) {
    return {make_result("sampling_2d/checkerboard_tv", std::numeric_limits<double>::quiet_NaN(), 0.10, "<",
                        std::string("training diverged: ") + e.what(), sw.seconds())};
  }
  ImpliedScoreModel score(std::get<LogitTableModel>(model), s);
  Rng init_rng(seed, 0x1a);
  std::vector<State> inits;
  for (int c = 0; c < 500; ++c) {
    inits.push_back({static_cast<int>(init_rng.uniform_index(91)), static_cast<int>(init_rng.uniform_index(91))});
  }
  ChainStats stats;
  const auto chains = run_chains(score, inits, 4000, 2000, 2, seed, 0, &stats);
  std::vector<State> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const auto hist = TabularDistribution::empirical(data.space, all);
  const auto emp = TabularDistribution::empirical(data.space, data.samples);
  return {make_result("sampling_2d/checkerboard_tv", total_variation(hist.mass(), emp.mass()), 0.10, "<",
                      std::to_string(all.size()) + " MH samples, acceptance " + fmt(stats.acceptance_rate()),
                      sw.seconds())};
}

std::vector<CheckResult> check_gradients(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng(seed, 0x9c);

  const DiscreteSpace grid_space({3, 4});
  const auto grid = build_structure(StructureKind::Grid, grid_space);
  const TabularDistribution p = random_distribution(grid_space, rng, 1.0);
  const auto grid_batch = draw(p, 16, rng);

  const DiscreteSpace bits = DiscreteSpace::binary(4);
  const auto flips = build_structure(StructureKind::Grid, bits, Boundary::Wrap);
  const TabularDistribution pb = random_distribution(bits, rng, 1.0);
  const auto bit_batch = draw(pb, 16, rng);

  LogitTableModel table(grid_space, random_vector(grid_space.total_states(), rng, 0.5));
  ScoreNetModel net(grid, ScoreNetConfig{{6, 6}, InputEncoding::Affine, seed});
  ScoreNetModel onehot(grid, ScoreNetConfig{{5}, InputEncoding::OneHot, seed + 1});
  MaskedARModel made(4, MaskedARConfig{{8}, true, seed});
  made.parameters() = random_vector(made.parameters().size(), rng, 0.4);
  ImpliedScoreModel table_scores(table, grid);
  ImpliedScoreModel made_scores(made, flips);

  auto verify = [&](const std::string& name, std::vector<double>& params,
                    const std::function<ObjectiveValue(Rng&)>& eval) {
    Stopwatch sw;
    const Rng frozen(seed, 0x77);  // every evaluation replays the same draws
    auto once = [&]() {
      Rng r = frozen;
      return eval(r);
    };
    const ObjectiveValue v = once();
    const auto res = gradient_check([&]() { return once().value; }, params, v.grad, 1e-5, 48);
    out.push_back(make_result("gradients/" + name, res.max_rel_error, 1e-4, "<",
                              std::to_string(res.checked) + " coordinates, worst #" +
                                  std::to_string(res.worst_index) + " analytic " + fmt(res.analytic_at_worst) +
                                  " numeric " + fmt(res.numeric_at_worst),
                              sw.seconds()));
  };

  struct ScoreCase {
    std::string name;
    ScoreModel* model;
    const TabularDistribution* target;
    const std::vector<State>* batch;
  };
  const std::vector<ScoreCase> score_cases{
      {"logit_table", &table_scores, &p, &grid_batch},
      {"score_net", &net, &p, &grid_batch},
      {"score_net_onehot", &onehot, &p, &grid_batch},
      {"masked_ar", &made_scores, &pb, &bit_batch},
  };
  for (const ScoreCase& c : score_cases) {
    ScoreModel& m = *c.model;
    const TabularDistribution& target = *c.target;
    const std::span<const State> batch = *c.batch;
    const NoiseKernel kernel(target.space(), 0.9);
    const ReverseIndex reverse = ReverseIndex::tabulate(m.structure());
    std::vector<double>& params = m.parameters();
    verify(c.name + "/csm_loss_exact", params, [&](Rng&) { return csm_loss_exact(m, target); });
    verify(c.name + "/jcsm_exact", params, [&](Rng&) { return jcsm_exact(m, target); });
    verify(c.name + "/csm_mc", params, [&](Rng& r) {
      return on_tape(m, [&](ad::Tape& t, ObjectiveMeta& meta) {
        ad::Var j1 = record::estimate_j1(t, m, batch, r, meta);
        return j1 - record::estimate_j2(t, m, batch, reverse, r, meta);
      });
    });
    verify(c.name + "/csm_structured", params, [&](Rng& r) {
      return on_tape(m, [&](ad::Tape& t, ObjectiveMeta& meta) {
        ad::Var j1 = record::estimate_j1(t, m, batch, r, meta);
        return j1 - record::estimate_j2_structured(t, m, batch, r, meta);
      });
    });
    verify(c.name + "/dcsm", params, [&](Rng& r) { return dcsm_loss(m, batch, kernel, r); });
    verify(c.name + "/dcsm_exact", params, [&](Rng&) { return dcsm_loss_exact(m, target, kernel); });
  }

  struct DensityCase {
    std::string name;
    DensityModel* model;
    const std::vector<State>* batch;
  };
  for (const DensityCase& c : {DensityCase{"logit_table", &table, &grid_batch},
                               DensityCase{"masked_ar", &made, &bit_batch}}) {
    DensityModel& m = *c.model;
    const std::span<const State> batch = *c.batch;
    std::vector<double>& params = m.parameters();
    for (RatioVariant variant : {RatioVariant::Fixed, RatioVariant::Original}) {
      const std::string tag = variant == RatioVariant::Fixed ? "fixed" : "original";
      verify(c.name + "/ratio_" + tag, params, [&](Rng&) { return ratio_matching_loss(m, batch, variant); });
      verify(c.name + "/marginal_" + tag, params, [&](Rng&) { return marginalization_loss(m, batch, variant); });
    }
    verify(c.name + "/nll", params, [&](Rng&) { return nll_loss(m, batch); });
  }
  return out;
}

std::vector<std::string> check_suite_names() {
  return {"completeness", "estimators", "equivalence", "stein_limit", "denoise", "mh",
          "consistency",  "dcsm",       "degeneracy",  "sampling_2d", "gradients"};
}

std::vector<CheckResult> run_check_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "completeness") return check_completeness(seed);
  if (suite == "estimators") return check_estimators(seed);
  if (suite == "equivalence") return check_equivalence(seed);
  if (suite == "stein_limit") return check_stein_limit(seed);
  if (suite == "denoise") return check_denoise(seed);
  if (suite == "mh") return check_mh(seed);
  if (suite == "consistency") return check_consistency(seed);
  if (suite == "dcsm") return check_dcsm_fixed_point(seed);
  if (suite == "degeneracy") return check_degeneracy(seed);
  if (suite == "sampling_2d") return check_sampling_2d(seed);
  if (suite == "gradients") return check_gradients(seed);
  std::string known;
  for (const auto& n : check_suite_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error("unknown check suite '" + suite + "' (known: " + known + ")");
}

void write_check_report(const std::string& suite, const std::vector<CheckResult>& results, std::ostream& out) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  out << "suite,check,measured,relation,tolerance,status,seconds,detail\n";
  out.precision(10);
  for (const CheckResult& r : results) {
    out << suite << ',' << r.name << ',' << r.measured << ',' << quote(r.relation) << ',' << r.tolerance << ','
        << (r.passed ? "pass" : "fail") << ',' << r.seconds << ',' << quote(r.detail) << '\n';
  }
}

}  // namespace csm

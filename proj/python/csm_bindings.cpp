#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "csm/checks.hpp"
#include "csm/cli.hpp"
#include "csm/data.hpp"
#include "csm/denoise.hpp"
#include "csm/error.hpp"
#include "csm/exact.hpp"
#include "csm/graphs.hpp"
#include "csm/samplers.hpp"

namespace py = pybind11;
using namespace csm;

namespace {

using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

IntArray states_to_array(const std::vector<State>& xs, std::size_t dims) {
  IntArray out({xs.size(), dims});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t d = 0; d < dims; ++d) v(i, d) = xs[i][d];
  }
  return out;
}

RealArray to_array(std::span<const double> v) {
  RealArray out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const RealArray& a) { return {a.data(), a.data() + a.size()}; }

// A masses array shaped like the space (or flat, in flat-index order).
TabularDistribution distribution(const RealArray& mass, const std::vector<int>& dims) {
  return TabularDistribution::from_weights(DiscreteSpace(dims), to_vector(mass));
}

RunConfig config_from(const py::dict& options) {
  RunConfig c;
  for (auto item : options) {
    const auto key = py::str(item.first).cast<std::string>();
    py::handle value = item.second;
    std::string text;
    if (py::isinstance<py::bool_>(value)) {
      text = value.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      for (auto v : value) text += (text.empty() ? "" : ",") + py::str(v).cast<std::string>();
    } else {
      text = py::str(value).cast<std::string>();
    }
    set_config_value(c, key, text);
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_csm, m) {
  m.doc() = "Concrete score matching for discrete data";

  // Translators run most-recent first, so the base class goes in first.
  const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<Disconnected>(m, "Disconnected", base.ptr());
  py::register_exception<InvalidState>(m, "InvalidState", base.ptr());
  py::register_exception<EnumerationLimit>(m, "EnumerationLimit", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  py::class_<NeighborhoodStructure>(m, "Structure")
      .def(py::init([](const std::string& kind, std::vector<int> dims, const std::string& boundary) {
             return build_structure(parse_structure_kind(kind), DiscreteSpace(std::move(dims)),
                                    parse_boundary(boundary));
           }),
           py::arg("kind"), py::arg("dims"), py::arg("boundary") = "drop")
      .def_static(
          "from_edges",
          [](std::vector<int> dims, const std::vector<std::pair<State, State>>& edges) {
            return build_explicit_structure(DiscreteSpace(std::move(dims)), edges);
          },
          py::arg("dims"), py::arg("edges"))
      .def_property_readonly("kind", [](const NeighborhoodStructure& s) { return to_string(s.kind()); })
      .def_property_readonly("dims", [](const NeighborhoodStructure& s) { return s.space().dims(); })
      .def_property_readonly("max_degree", &NeighborhoodStructure::max_degree)
      .def_property_readonly("symmetric", &NeighborhoodStructure::symmetric)
      .def("neighbors", &NeighborhoodStructure::neighbors, py::arg("x"))
      .def("degree", &NeighborhoodStructure::degree, py::arg("x"))
      .def(
          "reverse_entries",
          [](const NeighborhoodStructure& s, const State& target) {
            std::vector<std::pair<State, std::size_t>> out;
            for (const auto& e : build_reverse_index(s).entries(target)) out.emplace_back(e.source, e.position);
            return out;
          },
          py::arg("target"), "Pairs (x, i) with neighbors(x)[i] == target.")
      .def(
          "is_weakly_connected",
          [](const NeighborhoodStructure& s, const std::optional<std::vector<State>>& support) {
            return support ? is_weakly_connected(s, *support) : is_weakly_connected(s);
          },
          py::arg("support") = py::none());

  m.def(
      "concrete_score",
      [](const RealArray& mass, const NeighborhoodStructure& s, const State& x) {
        return concrete_score_exact(distribution(mass, s.space().dims()), s, x);
      },
      py::arg("mass"), py::arg("structure"), py::arg("x"), "p(N(x)_i) / p(x) - 1 for each neighbor of x.");

  m.def(
      "reconstruct",
      [](const std::function<std::vector<double>(const State&)>& score_fn, const NeighborhoodStructure& s) {
        const auto rec = reconstruct_density(score_fn, s);
        return py::make_tuple(to_array(rec.distribution.mass()), rec.max_cycle_residual);
      },
      py::arg("score_fn"), py::arg("structure"),
      "Masses (flat order) rebuilt from Concrete scores, and the largest cycle residual.");

  m.def(
      "kl_and_tv",
      [](const RealArray& p, const RealArray& q) {
        const DiscreteSpace space({static_cast<int>(p.size())});
        const auto d = kl_and_tv(TabularDistribution::from_weights(space, to_vector(p)),
                                 TabularDistribution::from_weights(space, to_vector(q)));
        return py::make_tuple(d.kl, d.tv);
      },
      py::arg("p"), py::arg("q"));

  m.def(
      "run_chain",
      [](const RealArray& logits, const NeighborhoodStructure& s, const State& init, std::size_t steps,
         std::size_t burn_in, std::size_t thin, std::uint64_t seed) {
        LogitTableModel table(s.space(), to_vector(logits));
        ImpliedScoreModel model(table, s);
        Rng rng(seed);
        ChainStats stats;
        std::vector<State> xs;
        {
          py::gil_scoped_release release;
          xs = run_chain(model, init, steps, burn_in, thin, rng, &stats);
        }
        return py::make_tuple(states_to_array(xs, s.space().num_dims()), stats.acceptance_rate());
      },
      py::arg("logits"), py::arg("structure"), py::arg("init"), py::arg("steps"), py::arg("burn_in") = 0,
      py::arg("thin") = 1, py::arg("seed") = 0,
      "Metropolis-Hastings on the scores implied by a logit table; returns (samples, acceptance rate).");

  m.def(
      "gen_1d_toy",
      [](std::size_t n, std::uint64_t seed) {
        const Dataset d = gen_1d_toy(n, seed);
        return py::make_tuple(states_to_array(d.samples, 1), to_array(d.truth->mass()));
      },
      py::arg("n"), py::arg("seed") = 0, "Samples of shape (n, 1) and the 16 true masses.");

  m.def(
      "gen_2d_toy",
      [](const std::string& name, std::size_t n, int bins, std::uint64_t seed) {
        const Dataset d = gen_2d_toy(name, n, bins, seed);
        return py::make_tuple(states_to_array(d.samples, 2), to_array(d.truth->mass()));
      },
      py::arg("name"), py::arg("n"), py::arg("bins") = 91, py::arg("seed") = 0);

  m.def(
      "triangular_pdf", [](const RealArray& u) { return triangular_pdf(to_vector(u)); }, py::arg("u"));

  m.def(
      "posterior_weights",
      [](const RealArray& noisy, const RealArray& mass, std::vector<int> dims) {
        const auto p = distribution(mass, dims);
        const auto post = posterior_weights(to_vector(noisy), ratio_fn_from_distribution(p), p.space());
        return py::make_tuple(states_to_array(post.corners, dims.size()), to_array(post.weights));
      },
      py::arg("noisy"), py::arg("mass"), py::arg("dims"));

  m.def(
      "recover_stein_score",
      [](const RealArray& noisy, const RealArray& mass, std::vector<int> dims) {
        const auto p = distribution(mass, dims);
        return to_array(recover_stein_score(to_vector(noisy), ratio_fn_from_distribution(p), p.space()));
      },
      py::arg("noisy"), py::arg("mass"), py::arg("dims"));

  m.def("config_keys", &config_keys);

  m.def(
      "train",
      [](const py::dict& options) {
        const RunConfig c = config_from(options);
        std::ostringstream log;
        TrainOutcome r;
        {
          py::gil_scoped_release release;
          r = cmd_train(c, log);
        }
        py::dict out;
        out["checkpoint"] = r.checkpoint_path;
        out["models"] = r.models;
        out["final_objective"] = r.final_objective;
        out["final_tv"] = r.final_tv;
        out["log"] = log.str();
        return out;
      },
      py::arg("options"), "Runs `csm train` with config keys given as a dict.");

  m.def(
      "sample",
      [](const py::dict& options) {
        const RunConfig c = config_from(options);
        std::ostringstream log;
        SampleOutcome r;
        {
          py::gil_scoped_release release;
          r = cmd_sample(c, log);
        }
        const std::size_t dims = r.samples.empty() ? 0 : r.samples.front().size();
        return py::make_tuple(states_to_array(r.samples, dims), r.acceptance_rate);
      },
      py::arg("options"));

  m.def(
      "evaluate",
      [](const py::dict& options) {
        std::ostringstream log;
        return cmd_eval(config_from(options), log);
      },
      py::arg("options"), "Mean log-likelihood in nats.");

  m.def("check_suites", &check_suite_names);
  m.def(
      "check",
      [](const std::string& suite, std::uint64_t seed) {
        std::vector<CheckResult> results;
        {
          py::gil_scoped_release release;
          results = run_check_suite(suite, seed);
        }
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["name"] = r.name;
          d["measured"] = r.measured;
          d["tolerance"] = r.tolerance;
          d["relation"] = r.relation;
          d["passed"] = r.passed;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("suite"), py::arg("seed") = 0);
}

// Copyright 2026 The SOPE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings for the sope core.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sope/checks.hpp"
#include "sope/config.hpp"
#include "sope/error.hpp"
#include "sope/estimators.hpp"
#include "sope/harness.hpp"
#include "sope/mdp.hpp"
#include "sope/occupancy.hpp"
#include "sope/rng.hpp"

namespace py = pybind11;
using namespace sope;

namespace {

RatioMethod parse_method(const std::string& name) {
  if (name == "model-based") return RatioMethod::kModelBased;
  if (name == "minmax-tabular") return RatioMethod::kMinmaxTabular;
  throw InvalidArgument("unknown ratio method '" + name +
                        "' (expected model-based or minmax-tabular)");
}

std::string csv_text(const SweepReport& r, bool raw) {
  std::ostringstream out;
  if (raw) {
    write_raw_csv(out, r);
  } else {
    write_aggregate_csv(out, r);
  }
  return out.str();
}

py::object optional_n(int n) {
  return n == kNoN ? py::none() : py::object(py::int_(n));
}

}  // namespace

PYBIND11_MODULE(_sope, m) {
  m.doc() = "Spectrum of off-policy estimators (C++ core)";
  m.attr("__version__") = kVersion;
  m.attr("RNG_ALGORITHM") = std::string(kRngAlgorithm);

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
  py::register_exception<SupportError>(m, "SupportError", error.ptr());
  py::register_exception<MaskedRatioError>(m, "MaskedRatioError", error.ptr());
  py::register_exception<ZeroDenominatorError>(m, "ZeroDenominatorError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

  // Environments and policies.
  py::class_<TabularMdp>(m, "TabularMdp")
      .def(py::init<int, int, std::vector<double>, Table, Vector, double, int,
                    std::vector<int>>(),
           py::arg("n_states"), py::arg("n_actions"), py::arg("transitions"),
           py::arg("reward"), py::arg("initial_dist"), py::arg("gamma"),
           py::arg("horizon"), py::arg("absorbing") = std::vector<int>{})
      .def_property_readonly("n_states", &TabularMdp::n_states)
      .def_property_readonly("n_actions", &TabularMdp::n_actions)
      .def_property_readonly("gamma", &TabularMdp::gamma)
      .def_property_readonly("horizon", &TabularMdp::horizon)
      .def_property_readonly("reward", &TabularMdp::reward_table)
      .def_property_readonly("initial_dist", &TabularMdp::initial_dist)
      .def_property_readonly("absorbing", &TabularMdp::absorbing)
      .def("transition", &TabularMdp::transition, py::arg("s"), py::arg("a"), py::arg("next"))
      .def("with_horizon", &TabularMdp::with_horizon)
      .def("with_gamma", &TabularMdp::with_gamma);

  py::class_<StaticPolicy>(m, "StaticPolicy")
      .def(py::init<Table>(), py::arg("probs"))
      .def_property_readonly("table", &StaticPolicy::table)
      .def("prob", &StaticPolicy::prob, py::arg("s"), py::arg("a"));

  m.def("build_graph_env", &build_graph_env, py::arg("chain_len"), py::arg("gamma"));
  m.def("build_toy_mc_env", &build_toy_mc_env, py::arg("gamma") = 0.99);
  m.def("make_static_policy",
        py::overload_cast<const TabularMdp&, double>(&make_static_policy),
        py::arg("mdp"), py::arg("p_action0"));

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init<>())
      .def_readwrite("states", &Trajectory::states)
      .def_readwrite("actions", &Trajectory::actions)
      .def_readwrite("rewards", &Trajectory::rewards)
      .def_readwrite("rhos", &Trajectory::rhos)
      .def("__len__", &Trajectory::length)
      .def("__eq__", [](const Trajectory& a, const Trajectory& b) { return a == b; });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](std::vector<Trajectory> trajectories, StaticPolicy pi_b,
                       StaticPolicy pi_e, double gamma, int horizon, std::int64_t seed) {
             return Dataset{std::move(trajectories), std::move(pi_b), std::move(pi_e), gamma,
                            horizon, seed};
           }),
           py::arg("trajectories"), py::arg("pi_b"), py::arg("pi_e"), py::arg("gamma"),
           py::arg("horizon"), py::arg("seed") = 0)
      .def_readonly("trajectories", &Dataset::trajectories)
      .def_readonly("pi_b", &Dataset::pi_b)
      .def_readonly("pi_e", &Dataset::pi_e)
      .def_readonly("gamma", &Dataset::gamma)
      .def_readonly("horizon", &Dataset::horizon)
      .def_readonly("seed", &Dataset::seed)
      .def("__len__", &Dataset::size);

  m.def("sample_trajectory", &sample_trajectory, py::arg("mdp"), py::arg("pi_b"),
        py::arg("pi_e"), py::arg("seed"));
  m.def("sample_dataset", &sample_dataset, py::arg("mdp"), py::arg("pi_b"),
        py::arg("pi_e"), py::arg("m"), py::arg("base_seed"),
        py::call_guard<py::gil_scoped_release>());
  m.def("truncate_dataset", &truncate_dataset, py::arg("data"), py::arg("steps"));

  // Occupancies and oracles.
  py::enum_<RatioKind>(m, "RatioKind")
      .value("ORACLE_AVERAGE", RatioKind::kOracleAverage)
      .value("ORACLE_TRUNCATED", RatioKind::kOracleTruncated)
      .value("ORACLE_TIME_INDEXED", RatioKind::kOracleTimeIndexed)
      .value("MODEL_BASED", RatioKind::kModelBased)
      .value("MINMAX_TABULAR", RatioKind::kMinmaxTabular);
  py::enum_<HorizonMode>(m, "HorizonMode")
      .value("INFINITE", HorizonMode::kInfinite)
      .value("FINITE", HorizonMode::kFinite);

  py::class_<RatioTable>(m, "RatioTable")
      .def_readonly("w", &RatioTable::w)
      .def_readonly("support", &RatioTable::support)
      .def_readonly("kind", &RatioTable::kind)
      .def_readonly("steps", &RatioTable::steps)
      .def("at", &RatioTable::at, py::arg("s"), py::arg("a"));
  py::class_<QTable>(m, "QTable")
      .def(py::init([](Table q, Vector v) { return QTable{std::move(q), std::move(v)}; }),
           py::arg("q"), py::arg("v"))
      .def_readonly("q", &QTable::q)
      .def_readonly("v", &QTable::v);

  m.def("occupancy_t", &occupancy_t, py::arg("mdp"), py::arg("policy"));
  m.def("occupancy_avg", &occupancy_avg, py::arg("mdp"), py::arg("policy"));
  m.def("occupancy_trunc", &occupancy_trunc, py::arg("mdp"), py::arg("policy"), py::arg("T"));
  m.def("stationary_occupancy", &stationary_occupancy, py::arg("mdp"), py::arg("policy"));
  m.def("bellman_residual_avg", &bellman_residual_avg, py::arg("mdp"), py::arg("policy"),
        py::arg("d"));
  m.def("exact_j", &exact_j, py::arg("mdp"), py::arg("policy"));
  m.def("exact_q", &exact_q, py::arg("mdp"), py::arg("policy"),
        py::arg("mode") = HorizonMode::kInfinite);
  m.def("oracle_ratio", &oracle_ratio, py::arg("mdp"), py::arg("pi_e"), py::arg("pi_b"),
        py::arg("kind") = RatioKind::kOracleAverage, py::arg("step") = 0);
  m.def("conditional_ratio_bruteforce",
        [](const TabularMdp& mdp, const StaticPolicy& pi_e, const StaticPolicy& pi_b, int t,
           int s, int a) { return conditional_ratio_bruteforce(mdp, pi_e, pi_b, t, s, a); },
        py::arg("mdp"), py::arg("pi_e"), py::arg("pi_b"), py::arg("t"), py::arg("s"),
        py::arg("a"));
  m.def("estimate_ratio",
        [](const Dataset& data, const std::string& method, double smoothing, double ridge) {
          return estimate_ratio(data, parse_method(method), {smoothing, ridge});
        },
        py::arg("data"), py::arg("method") = "model-based",
        py::arg("smoothing") = kDefaultModelSmoothing, py::arg("ridge") = kDefaultRatioRidge);
  m.def("empirical_occupancy", &empirical_occupancy, py::arg("data"));

  // Estimators.
  py::enum_<Family>(m, "Family")
      .value("IS", Family::kIS)
      .value("PDIS", Family::kPDIS)
      .value("SIS", Family::kSIS)
      .value("WSIS", Family::kWSIS)
      .value("SOPE", Family::kSOPE)
      .value("CWPDIS", Family::kCWPDIS)
      .value("WSOPE", Family::kWSOPE)
      .value("DRSOPE", Family::kDRSOPE);
  py::enum_<RatioMode>(m, "RatioMode")
      .value("AVERAGE", RatioMode::kAverage)
      .value("TRUNCATED", RatioMode::kTruncated);
  py::enum_<NextAction>(m, "NextAction")
      .value("EXPECTATION", NextAction::kExpectation)
      .value("SAMPLED", NextAction::kSampled);

  py::class_<Estimate>(m, "Estimate")
      .def_readonly("value", &Estimate::value)
      .def_readonly("per_trajectory", &Estimate::per_trajectory)
      .def_property_readonly("max_weight", [](const Estimate& e) { return e.diagnostics.max_weight; })
      .def_property_readonly("ess", [](const Estimate& e) { return e.diagnostics.ess; })
      .def("__float__", [](const Estimate& e) { return e.value; });

  m.def("weight_wtn", &weight_wtn, py::arg("traj"), py::arg("t"), py::arg("n"),
        py::arg("ratio") = nullptr);
  m.def("estimate_is", &estimate_is, py::arg("data"));
  m.def("estimate_pdis", &estimate_pdis, py::arg("data"));
  m.def("estimate_sis", &estimate_sis, py::arg("data"), py::arg("ratio"));
  m.def("estimate_weighted_sis", &estimate_weighted_sis, py::arg("data"), py::arg("ratio"));
  m.def("estimate_cwpdis", &estimate_cwpdis, py::arg("data"));
  m.def("estimate_sope", &estimate_sope, py::arg("data"), py::arg("n"),
        py::arg("ratio") = nullptr, py::arg("mode") = RatioMode::kAverage);
  m.def("estimate_wsope", &estimate_wsope, py::arg("data"), py::arg("n"),
        py::arg("ratio") = nullptr, py::arg("mode") = RatioMode::kAverage);
  m.def("estimate_dr_sope",
        [](const Dataset& data, int n, const RatioTable* ratio, const QTable& q,
           NextAction next, std::uint64_t seed, RatioMode mode) {
          return estimate_dr_sope(data, n, ratio, q, {next, seed, mode});
        },
        py::arg("data"), py::arg("n"), py::arg("ratio"), py::arg("q"),
        py::arg("next_action") = NextAction::kExpectation, py::arg("seed") = 0,
        py::arg("mode") = RatioMode::kAverage);

  // Harness and configuration.
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("pi_e_p", &ExperimentConfig::pi_e_p)
      .def_readwrite("pi_b_p", &ExperimentConfig::pi_b_p)
      .def_readwrite("n_values", &ExperimentConfig::n_values)
      .def_readwrite("batch_sizes", &ExperimentConfig::batch_sizes)
      .def_readwrite("trials", &ExperimentConfig::trials)
      .def_readwrite("base_seed", &ExperimentConfig::base_seed)
      .def_readwrite("families", &ExperimentConfig::families)
      .def_readwrite("bootstrap_resamples", &ExperimentConfig::bootstrap_resamples)
      .def_readwrite("threads", &ExperimentConfig::threads)
      .def_property_readonly("chain_len", [](const ExperimentConfig& c) { return c.environment.chain_len; })
      .def_property_readonly("gamma", [](const ExperimentConfig& c) { return c.environment.gamma; })
      .def("__str__", &format_config);

  m.def("parse_config", &parse_config, py::arg("path"),
        py::arg("overrides") = std::vector<std::string>{});
  m.def("parse_config_string", &parse_config_string, py::arg("text"),
        py::arg("overrides") = std::vector<std::string>{});
  m.def("format_config", &format_config, py::arg("config"));

  py::class_<SweepReport>(m, "SweepReport")
      .def_readonly("config", &SweepReport::config)
      .def_readonly("true_j", &SweepReport::true_j)
      .def_readonly("rng_algorithm", &SweepReport::rng_algorithm)
      .def_readonly("ratio_method", &SweepReport::ratio_method)
      .def_readonly("wall_clock_seconds", &SweepReport::wall_clock_seconds)
      .def_property_readonly("rows", [](const SweepReport& r) {
        py::list out;
        for (const SweepRow& row : r.rows) {
          out.append(py::dict(py::arg("family") = to_string(row.family),
                              py::arg("n") = optional_n(row.n),
                              py::arg("batch_size") = row.batch_size,
                              py::arg("trial") = row.trial,
                              py::arg("estimate") = row.estimate));
        }
        return out;
      })
      .def_property_readonly("aggregates", [](const SweepReport& r) {
        py::list out;
        for (const AggregateRow& a : r.aggregates) {
          out.append(py::dict(py::arg("family") = to_string(a.family),
                              py::arg("n") = optional_n(a.n),
                              py::arg("batch_size") = a.batch_size, py::arg("bias") = a.bias,
                              py::arg("variance") = a.variance, py::arg("mse") = a.mse,
                              py::arg("mse_ci_lo") = a.mse_ci_lo,
                              py::arg("mse_ci_hi") = a.mse_ci_hi));
        }
        return out;
      })
      .def("raw_csv", [](const SweepReport& r) { return csv_text(r, true); })
      .def("aggregate_csv", [](const SweepReport& r) { return csv_text(r, false); })
      .def("svg", &render_svg)
      .def("metadata_json", &metadata_json)
      .def("write_csv", &write_csv, py::arg("dir"))
      .def("emit_svg", &emit_svg, py::arg("path"));

  m.def("run_sweep", &run_sweep, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("passed", &CheckResult::passed)
      .def_readonly("detail", &CheckResult::detail);
  m.def("run_builtin_checks", &run_builtin_checks);
}

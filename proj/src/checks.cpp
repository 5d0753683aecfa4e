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

#include "sope/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>

#include "sope/estimators.hpp"
#include "sope/occupancy.hpp"

namespace sope {
namespace {

std::string deviation(double worst, double tol) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max deviation %.3e (tolerance %.0e)", worst, tol);
  return buf;
}

template <typename F>
CheckResult check(const std::string& name, double tol, F&& worst_deviation) {
  try {
    const double worst = worst_deviation();
    return {name, worst <= tol, deviation(worst, tol)};
  } catch (const std::exception& e) {
    return {name, false, e.what()};
  }
}

// Two states: 0 moves to the absorbing state 1 whatever the action.
TabularMdp deterministic_micro(int horizon) {
  std::vector<double> p = {0, 1, 0, 1, 0, 1, 0, 1};
  Table r(2, 2);
  r << 1.0, -2.0, 0.0, 0.0;
  Vector init(2);
  init << 1.0, 0.0;
  return TabularMdp(2, 2, std::move(p), std::move(r), std::move(init), 0.9,
                    horizon, {1});
}

}  // namespace

double bruteforce_expectation(const TabularMdp& mdp, const StaticPolicy& pi_b,
                              const StaticPolicy& pi_e,
                              const std::function<double(const Dataset&)>& f) {
  double total = 0.0;
  Dataset single{{}, pi_b, pi_e, mdp.gamma(), mdp.horizon(), 0};
  for (auto& [traj, prob] :
       enumerate_trajectories(mdp, pi_b, pi_e, mdp.horizon())) {
    single.trajectories = {traj};
    total += prob * f(single);
  }
  return total;
}

std::vector<CheckResult> run_builtin_checks() {
  std::vector<CheckResult> out;
  const TabularMdp graph = build_graph_env(2, 0.98);
  const StaticPolicy pi_e = make_static_policy(graph, 0.9);
  const StaticPolicy pi_b = make_static_policy(graph, 0.5);

  out.push_back(check("conditional ratio identity (graph, t <= 4)", 1e-10, [&] {
    const TabularMdp mdp = graph.with_horizon(4);
    const auto d_b = occupancy_t(mdp, pi_b);
    double worst = 0.0;
    for (int t = 1; t <= 4; ++t) {
      const RatioTable w =
          oracle_ratio(mdp, pi_e, pi_b, RatioKind::kOracleTimeIndexed, t);
      for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
          if (d_b[t - 1](s, a) <= 0.0) continue;
          const double brute = conditional_ratio_bruteforce(mdp, pi_e, pi_b, t, s, a);
          worst = std::max(worst, std::abs(brute - w.at(s, a)));
        }
      }
    }
    return worst;
  }));

  out.push_back(check("endpoint identities (graph(6), 20 datasets)", 1e-12, [] {
    const TabularMdp mdp = build_graph_env(6, 0.98);
    const StaticPolicy e = make_static_policy(mdp, 0.9);
    const StaticPolicy b = make_static_policy(mdp, 0.5);
    const int L = mdp.horizon();
    const RatioTable w = oracle_ratio(mdp, e, b, RatioKind::kOracleAverage);
    QTable zero{Table::Zero(mdp.n_states(), 2), Vector::Zero(mdp.n_states())};
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Dataset d = sample_dataset(mdp, b, e, 16, 1000 * k);
      auto gap = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
      gap(estimate_sope(d, 0, &w).value, estimate_sis(d, w).value);
      gap(estimate_sope(d, L, nullptr).value, estimate_pdis(d).value);
      gap(estimate_wsope(d, 0, &w).value, estimate_weighted_sis(d, w).value);
      gap(estimate_wsope(d, L, nullptr).value, estimate_cwpdis(d).value);
      for (int n = 0; n <= L; ++n) {
        gap(estimate_dr_sope(d, n, &w, zero).value, estimate_sope(d, n, &w).value);
      }
    }
    return worst;
  }));

  out.push_back(check("truncated-ratio unbiasedness (graph(2), L = 3)", 1e-10, [&] {
    const TabularMdp mdp = graph.with_horizon(3);
    const double j = exact_j(mdp, pi_e);
    double worst = 0.0;
    for (int n = 0; n <= 3; ++n) {
      std::optional<RatioTable> w;
      if (n < 3) {
        w = oracle_ratio(mdp, pi_e, pi_b, RatioKind::kOracleTruncated, 3 - n);
      }
      const double mean = bruteforce_expectation(mdp, pi_b, pi_e, [&](const Dataset& d) {
        return estimate_sope(d, n, w ? &*w : nullptr, RatioMode::kTruncated).value;
      });
      worst = std::max(worst, std::abs(mean - j));
    }
    return worst;
  }));

  out.push_back(check("IS and PDIS unbiasedness (graph(2), L = 3)", 1e-10, [&] {
    const TabularMdp mdp = graph.with_horizon(3);
    const double j = exact_j(mdp, pi_e);
    const double is = bruteforce_expectation(
        mdp, pi_b, pi_e, [](const Dataset& d) { return estimate_is(d).value; });
    const double pdis = bruteforce_expectation(
        mdp, pi_b, pi_e, [](const Dataset& d) { return estimate_pdis(d).value; });
    return std::max(std::abs(is - j), std::abs(pdis - j));
  }));

  out.push_back(check("stationary Bellman residual (graph(2), toy mc)", 1e-10, [&] {
    double worst = bellman_residual_avg(graph, pi_e, stationary_occupancy(graph, pi_e));
    const TabularMdp mc = build_toy_mc_env(0.99);
    const StaticPolicy p = make_static_policy(mc, 0.5);
    worst = std::max(worst, bellman_residual_avg(mc, p, stationary_occupancy(mc, p)));
    return worst;
  }));

  out.push_back(check("DR zero variance with exact q (micro mdp)", 1e-10, [] {
    const TabularMdp mdp = deterministic_micro(3);
    const StaticPolicy e = make_static_policy(mdp, 0.3);
    const StaticPolicy b = make_static_policy(mdp, 0.6);
    const QTable q = exact_q(mdp, e, HorizonMode::kInfinite);
    const double j = exact_j(mdp, e);
    const Dataset d = sample_dataset(mdp, b, e, 64, 5);
    const RatioTable w = oracle_ratio(mdp, e, b, RatioKind::kOracleAverage);
    double worst = 0.0;
    for (int n = 0; n <= mdp.horizon(); ++n) {
      const Estimate est = estimate_dr_sope(d, n, &w, q);
      for (double v : *est.per_trajectory) {
        worst = std::max(worst, std::abs(v - j));
      }
    }
    return worst;
  }));
  return out;
}

}  // namespace sope

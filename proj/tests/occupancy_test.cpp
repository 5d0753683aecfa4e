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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracle.hpp"
#include "sope/error.hpp"
#include "sope/occupancy.hpp"

using namespace sope;
using sope::testing::all_paths;
using sope::testing::path_occupancy;

namespace {

TabularMdp one_state(double reward, double gamma, int horizon) {
  Table r = Table::Constant(1, 2, reward);
  return TabularMdp(1, 2, {1.0, 1.0}, r, Vector::Ones(1), gamma, horizon);
}

double max_abs(const Table& t) { return t.cwiseAbs().maxCoeff(); }

struct GraphPair {
  TabularMdp mdp = build_graph_env(2, 0.9);
  StaticPolicy pi_e = make_static_policy(mdp, 0.9);
  StaticPolicy pi_b = make_static_policy(mdp, 0.5);
};

}  // namespace

TEST_CASE("one-state occupancy equals the policy") {
  const TabularMdp m = one_state(0.0, 0.9, 5);
  const StaticPolicy pi = make_static_policy(1, 0.3);
  for (const Table& d : occupancy_t(m, pi)) {
    CHECK(d(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(d(0, 1) == doctest::Approx(0.7).epsilon(1e-15));
  }
  const Table fixed = stationary_occupancy(m, pi);
  CHECK(fixed(0, 0) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(bellman_residual_avg(m, pi, fixed) < 1e-15);
}

TEST_CASE("time-indexed occupancy matches path enumeration") {
  const TabularMdp g = build_graph_env(2, 0.9).with_horizon(4);
  const StaticPolicy pi = make_static_policy(g, 0.5);
  const StaticPolicy pe = make_static_policy(g, 0.9);
  const auto paths = all_paths(g, pi, pe, 4);
  const std::vector<Table> d = occupancy_t(g, pi);
  const std::vector<Table> de = occupancy_t(g, pe);
  for (int t = 1; t <= 4; ++t) {
    for (int s = 0; s < g.n_states(); ++s) {
      for (int a = 0; a < 2; ++a) {
        CHECK(d[t - 1](s, a) == doctest::Approx(path_occupancy(paths, t, s, a, false)).epsilon(1e-14));
        CHECK(de[t - 1](s, a) == doctest::Approx(path_occupancy(paths, t, s, a, true)).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("occupancies are normalized") {
  for (const TabularMdp& m : {build_graph_env(5, 0.98), build_toy_mc_env(0.99)}) {
    const StaticPolicy pi = make_static_policy(m, 0.7);
    const OccupancyTables tables = occupancy_tables(m, pi);
    REQUIRE(static_cast<int>(tables.d_t.size()) == m.horizon());
    for (const Table& d : tables.d_t) CHECK(std::abs(d.sum() - 1.0) < 1e-10);
    CHECK(std::abs(tables.d_avg.sum() - 1.0) < 1e-10);
    CHECK(max_abs(tables.d_trunc.back() - tables.d_avg) == 0.0);
    CHECK(max_abs(occupancy_trunc(m, pi, m.horizon()) - occupancy_avg(m, pi)) == 0.0);
    CHECK(tables.j_value == doctest::Approx(exact_j(m, pi)).epsilon(1e-14));

    Table manual = Table::Zero(m.n_states(), 2);
    double weight = 0.0;
    double discount = 1.0;
    for (const Table& d : tables.d_t) {
      manual += discount * d;
      weight += discount;
      discount *= m.gamma();
    }
    CHECK(max_abs(manual / weight - tables.d_avg) < 1e-10);
  }
}

TEST_CASE("undiscounted average is the plain time average") {
  const TabularMdp g = build_graph_env(4, 1.0);
  const StaticPolicy pi = make_static_policy(g, 0.6);
  const std::vector<Table> d = occupancy_t(g, pi);
  Table mean = Table::Zero(g.n_states(), 2);
  for (const Table& dt : d) mean += dt;
  mean /= static_cast<double>(d.size());
  CHECK(max_abs(occupancy_avg(g, pi) - mean) < 1e-14);
  Table first_two = (d[0] + d[1]) / 2.0;
  CHECK(max_abs(occupancy_trunc(g, pi, 2) - first_two) < 1e-14);
}

TEST_CASE("truncated occupancy rejects T out of range") {
  const TabularMdp g = build_graph_env(4, 0.9);
  const StaticPolicy pi = make_static_policy(g, 0.6);
  CHECK_THROWS_AS(occupancy_trunc(g, pi, 0), InvalidArgument);
  CHECK_THROWS_AS(occupancy_trunc(g, pi, 5), InvalidArgument);
}

TEST_CASE("average occupancy matches path enumeration") {
  GraphPair p;
  const auto paths = all_paths(p.mdp, p.pi_b, p.pi_e, 2);
  const Table avg = occupancy_avg(p.mdp, p.pi_e);
  for (int s = 0; s < p.mdp.n_states(); ++s) {
    for (int a = 0; a < 2; ++a) {
      const double want = (path_occupancy(paths, 1, s, a, true) +
                           0.9 * path_occupancy(paths, 2, s, a, true)) / 1.9;
      CHECK(avg(s, a) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("stationary fixed point") {
  for (const TabularMdp& m : {build_graph_env(20, 0.98), build_toy_mc_env(0.99),
                              testing::recurrent_micro(5)}) {
    const StaticPolicy pi = make_static_policy(m, 0.8);
    const Table fixed = stationary_occupancy(m, pi);
    CHECK(bellman_residual_avg(m, pi, fixed) < 1e-10);
    CHECK(std::abs(fixed.sum() - 1.0) < 1e-10);
  }
  const TabularMdp undiscounted = build_graph_env(3, 1.0);
  CHECK_THROWS_AS(stationary_occupancy(undiscounted, make_static_policy(undiscounted, 0.5)),
                  InvalidArgument);
}

TEST_CASE("finite-horizon average approaches the fixed point") {
  for (const TabularMdp& base : {build_toy_mc_env(0.9), testing::recurrent_micro(1),
                                 build_graph_env(30, 0.9)}) {
    const TabularMdp m = base.with_gamma(0.9).with_horizon(100);
    const StaticPolicy pi = make_static_policy(m, 0.4);
    const double gap = max_abs(occupancy_avg(m, pi) - stationary_occupancy(m, pi));
    CHECK(gap <= std::pow(0.9, 100) / (1 - 0.9));
    CHECK(gap <= std::pow(0.9, 100));
  }
  // With a short horizon the gap is visible and respects the same bound.
  const TabularMdp shortm = testing::recurrent_micro(10, 0.9);
  const StaticPolicy pi = make_static_policy(shortm, 0.4);
  const double gap = max_abs(occupancy_avg(shortm, pi) - stationary_occupancy(shortm, pi));
  CHECK(gap > 1e-6);
  CHECK(gap <= std::pow(0.9, 10));
}

TEST_CASE("exact_j examples") {
  const TabularMdp zero = build_graph_env(3, 0.9).with_horizon(3);
  Table r = Table::Zero(zero.n_states(), 2);
  const TabularMdp silent(zero.n_states(), 2, zero.transition_tensor(), r,
                          zero.initial_dist(), 0.9, 3, zero.absorbing());
  CHECK(exact_j(silent, make_static_policy(silent, 0.3)) == 0.0);

  const TabularMdp one = one_state(1.0, 0.9, 7);
  CHECK(exact_j(one, make_static_policy(1, 0.5)) ==
        doctest::Approx((1 - std::pow(0.9, 7)) / (1 - 0.9)).epsilon(1e-14));

  GraphPair p;
  const StaticPolicy uniform = make_static_policy(p.mdp, 0.5);
  CHECK(exact_j(p.mdp, uniform) == doctest::Approx(testing::value_e(p.mdp, uniform)).epsilon(1e-14));
  CHECK(exact_j(p.mdp, p.pi_e) == doctest::Approx(testing::value_e(p.mdp, p.pi_e)).epsilon(1e-14));
  // By hand: J = r(0,a) + 0.9 * (-1) averaged over the first action.
  CHECK(exact_j(p.mdp, uniform) == doctest::Approx(0.0 - 0.9).epsilon(1e-14));
}

TEST_CASE("exact_q examples") {
  const TabularMdp one = one_state(1.0, 0.5, 3);
  const QTable q = exact_q(one, make_static_policy(1, 0.5), HorizonMode::kInfinite);
  CHECK(q.q(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(q.v(0) == doctest::Approx(2.0).epsilon(1e-14));
  const QTable qf = exact_q(one, make_static_policy(1, 0.5), HorizonMode::kFinite);
  CHECK(qf.q(0, 1) == doctest::Approx(1.75).epsilon(1e-14));

  const TabularMdp g = build_graph_env(4, 0.9);
  const StaticPolicy pi = make_static_policy(g, 0.9);
  for (HorizonMode mode : {HorizonMode::kInfinite, HorizonMode::kFinite}) {
    const QTable t = exact_q(g, pi, mode);
    for (int s : g.absorbing()) CHECK(t.q.row(s).cwiseAbs().maxCoeff() == 0.0);
    for (int s = 0; s < g.n_states(); ++s) {
      CHECK(t.v(s) == doctest::Approx(pi.prob(s, 0) * t.q(s, 0) + pi.prob(s, 1) * t.q(s, 1)));
    }
  }
  CHECK_THROWS_AS(exact_q(build_graph_env(3, 1.0), make_static_policy(7, 0.5), HorizonMode::kInfinite),
                  InvalidArgument);
}

TEST_CASE("infinite-horizon q satisfies the stationary Bellman equation") {
  const TabularMdp m = testing::recurrent_micro(5, 0.8);
  const StaticPolicy pi = make_static_policy(m, 0.35);
  const QTable q = exact_q(m, pi, HorizonMode::kInfinite);
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < 2; ++s2) next += m.transition(s, a, s2) * q.v(s2);
      CHECK(std::abs(q.q(s, a) - (m.reward(s, a) + 0.8 * next)) < 1e-10);
    }
  }
}

TEST_CASE("finite-horizon q satisfies the backward recursion") {
  const TabularMdp m = testing::recurrent_micro(6, 0.8);
  const StaticPolicy pi = make_static_policy(m, 0.35);
  const QTable longer = exact_q(m, pi, HorizonMode::kFinite);
  const QTable shorter = exact_q(m.with_horizon(5), pi, HorizonMode::kFinite);
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < 2; ++s2) next += m.transition(s, a, s2) * shorter.v(s2);
      CHECK(std::abs(longer.q(s, a) - (m.reward(s, a) + 0.8 * next)) < 1e-10);
    }
  }
  // The t = 1 slice reproduces the value of the policy.
  const Vector& d1 = m.initial_dist();
  CHECK(std::abs(d1.dot(longer.v) - exact_j(m, pi)) < 1e-12);
}

TEST_CASE("infinite-horizon q agrees with exact_j for long horizons") {
  const TabularMdp m = build_toy_mc_env(0.9).with_horizon(400);
  const StaticPolicy pi = make_static_policy(m, 0.5);
  const QTable q = exact_q(m, pi, HorizonMode::kInfinite);
  CHECK(std::abs(m.initial_dist().dot(q.v) - exact_j(m, pi)) < 1e-10);
}

TEST_CASE("oracle ratio identities") {
  GraphPair p;
  const RatioTable same = oracle_ratio(p.mdp, p.pi_b, p.pi_b, RatioKind::kOracleAverage);
  for (int s = 0; s < p.mdp.n_states(); ++s) {
    for (int a = 0; a < 2; ++a) {
      if (same.support(s, a)) {
        CHECK(same.w(s, a) == doctest::Approx(1.0).epsilon(1e-14));
      } else {
        CHECK(same.w(s, a) == 0.0);
        CHECK_THROWS_AS(same.at(s, a), MaskedRatioError);
      }
    }
  }

  const RatioTable avg = oracle_ratio(p.mdp, p.pi_e, p.pi_b, RatioKind::kOracleAverage);
  const RatioTable trunc = oracle_ratio(p.mdp, p.pi_e, p.pi_b, RatioKind::kOracleTruncated, 2);
  CHECK(max_abs(avg.w - trunc.w) == 0.0);
  CHECK(avg.steps == 2);

  const auto paths = all_paths(p.mdp, p.pi_b, p.pi_e, 2);
  for (int s = 0; s < p.mdp.n_states(); ++s) {
    for (int a = 0; a < 2; ++a) {
      const double de = path_occupancy(paths, 1, s, a, true) + 0.9 * path_occupancy(paths, 2, s, a, true);
      const double db = path_occupancy(paths, 1, s, a, false) + 0.9 * path_occupancy(paths, 2, s, a, false);
      if (db > 0) CHECK(avg.w(s, a) == doctest::Approx(de / db).epsilon(1e-13));
    }
  }

  const Table d_b = occupancy_avg(p.mdp, p.pi_b);
  CHECK(std::abs((d_b.array() * avg.w.array()).sum() - 1.0) < 1e-10);
  CHECK_THROWS_AS(oracle_ratio(p.mdp, p.pi_e, p.pi_b, RatioKind::kModelBased), InvalidArgument);
  CHECK_THROWS_AS(oracle_ratio(p.mdp, p.pi_e, p.pi_b, RatioKind::kOracleTimeIndexed, 3),
                  InvalidArgument);
}

TEST_CASE("oracle ratio detects distribution-level support violations") {
  const TabularMdp g = build_graph_env(3, 0.9);
  const StaticPolicy pi_b = make_static_policy(g, 1.0);
  const StaticPolicy pi_e = make_static_policy(g, 0.5);
  CHECK_THROWS_AS(oracle_ratio(g, pi_e, pi_b, RatioKind::kOracleAverage), SupportError);
}

TEST_CASE("change of measure with time-indexed ratios") {
  for (const TabularMdp& m : {build_graph_env(4, 0.95), testing::recurrent_micro(6)}) {
    const StaticPolicy pi_e = make_static_policy(m, 0.9);
    const StaticPolicy pi_b = make_static_policy(m, 0.5);
    const std::vector<Table> d_b = occupancy_t(m, pi_b);
    double total = 0.0;
    double discount = 1.0;
    for (int t = 1; t <= m.horizon(); ++t) {
      const RatioTable w = oracle_ratio(m, pi_e, pi_b, RatioKind::kOracleTimeIndexed, t);
      total += discount * (d_b[t - 1].array() * w.w.array() * m.reward_table().array()).sum();
      discount *= m.gamma();
    }
    CHECK(std::abs(total - exact_j(m, pi_e)) < 1e-10);
  }
}

TEST_CASE("conditional trajectory ratio equals the occupancy ratio") {
  GraphPair p;
  const TabularMdp g = p.mdp.with_horizon(4);
  const auto paths = all_paths(g, p.pi_b, p.pi_e, 4);
  int checked = 0;
  for (int t = 1; t <= 4; ++t) {
    const RatioTable w = oracle_ratio(g, p.pi_e, p.pi_b, RatioKind::kOracleTimeIndexed, t);
    for (int s = 0; s < g.n_states(); ++s) {
      for (int a = 0; a < 2; ++a) {
        if (!w.support(s, a)) continue;
        double num = 0.0;
        double den = 0.0;
        for (const auto& path : paths) {
          if (path.states[t - 1] != s || path.actions[t - 1] != a) continue;
          double rho = 1.0;
          for (int j = 0; j < t; ++j) {
            rho *= p.pi_e.prob(path.states[j], path.actions[j]) /
                   p.pi_b.prob(path.states[j], path.actions[j]);
          }
          num += path.prob_b * rho;
          den += path.prob_b;
        }
        CHECK(std::abs(num / den - w.w(s, a)) < 1e-10);
        CHECK(std::abs(conditional_ratio_bruteforce(g, p.pi_e, p.pi_b, t, s, a) - w.w(s, a)) < 1e-10);
        ++checked;
      }
    }
  }
  CHECK(checked >= 10);
  CHECK(conditional_ratio_bruteforce(g, p.pi_e, p.pi_b, 1, 0, 1) ==
        doctest::Approx(0.1 / 0.5).epsilon(1e-15));
  CHECK(conditional_ratio_bruteforce(g, p.pi_b, p.pi_b, 3, 4, 0) == 1.0);
}

TEST_CASE("enumeration respects its cap") {
  const TabularMdp m = build_toy_mc_env(0.99).with_horizon(30);
  const StaticPolicy pi = make_static_policy(m, 0.5);
  CHECK_THROWS_AS(enumerate_trajectories(m, pi, pi, 30, 1000), InvalidArgument);
  GraphPair p;
  double total = 0.0;
  for (const auto& w : enumerate_trajectories(p.mdp, p.pi_b, p.pi_e, 2)) total += w.probability;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("estimate_model recovers a deterministic mdp exactly") {
  const TabularMdp mc = build_toy_mc_env(0.99);
  const StaticPolicy pi = make_static_policy(mc, 0.5);
  const Dataset data = sample_dataset(mc, pi, pi, 300, 5);
  const EstimatedModel model = estimate_model(data, 0.0);
  for (int s = 0; s < mc.n_states(); ++s) {
    for (int a = 0; a < 2; ++a) {
      REQUIRE_FALSE(model.fallback(s, a));
      for (int s2 = 0; s2 < mc.n_states(); ++s2) {
        CHECK(model.mdp.transition(s, a, s2) == mc.transition(s, a, s2));
      }
      CHECK(model.mdp.reward(s, a) == mc.reward(s, a));
    }
  }
}

TEST_CASE("estimate_model flags unvisited pairs") {
  const TabularMdp g = build_graph_env(4, 0.9);
  const StaticPolicy pi = make_static_policy(g, 0.5);
  const Dataset data = sample_dataset(g, pi, pi, 3, 0);
  const EstimatedModel model = estimate_model(data);
  // Label 2L-1 is never entered by any trajectory.
  const int unused = 2 * 4 - 1;
  for (int a = 0; a < 2; ++a) {
    CHECK(model.fallback(unused, a));
    CHECK(model.mdp.transition(unused, a, unused) == 1.0);
    CHECK(model.mdp.reward(unused, a) == 0.0);
    CHECK(model.visits(unused, a) == 0.0);
  }
  CHECK_FALSE(model.fallback(0, data.trajectories[0].actions[0]));
}

TEST_CASE("estimate_model error shrinks at the Monte Carlo rate") {
  const TabularMdp g = build_graph_env(6, 0.98);
  const StaticPolicy pi = make_static_policy(g, 0.5);
  auto mean_error = [&](int m) {
    double total = 0.0;
    const int seeds = 40;
    for (int k = 0; k < seeds; ++k) {
      const EstimatedModel model = estimate_model(sample_dataset(g, pi, pi, m, 100000 * k), 0.0);
      double worst = 0.0;
      for (int s = 0; s < 9; ++s) {
        for (int a = 0; a < 2; ++a) {
          if (model.fallback(s, a)) continue;
          for (int s2 = 0; s2 < g.n_states(); ++s2) {
            worst = std::max(worst, std::abs(model.mdp.transition(s, a, s2) - g.transition(s, a, s2)));
          }
        }
      }
      total += worst;
    }
    return total / seeds;
  };
  const double small = mean_error(128);
  const double large = mean_error(2048);
  // Sixteen times the data should cut the error about four-fold.
  CHECK(large / small > 0.15);
  CHECK(large / small < 0.4);
}

TEST_CASE("model-based ratio with exhaustive data equals the oracle") {
  GraphPair p;
  Dataset data{{}, p.pi_b, p.pi_e, p.mdp.gamma(), p.mdp.horizon(), 0};
  for (const auto& path : all_paths(p.mdp, p.pi_b, p.pi_e, 2)) {
    const int copies = static_cast<int>(std::lround(path.prob_b * 1024));
    REQUIRE(std::abs(copies - path.prob_b * 1024) < 1e-9);
    for (int k = 0; k < copies; ++k) {
      data.trajectories.push_back(testing::to_trajectory(p.mdp, p.pi_b, p.pi_e, path));
    }
  }
  const RatioTable est = estimate_ratio(data, RatioMethod::kModelBased, {0.0, 1e-3});
  const RatioTable oracle = oracle_ratio(p.mdp, p.pi_e, p.pi_b, RatioKind::kOracleAverage);
  CHECK(est.kind == RatioKind::kModelBased);
  for (int s = 0; s < p.mdp.n_states(); ++s) {
    for (int a = 0; a < 2; ++a) {
      if (oracle.support(s, a)) CHECK(std::abs(est.w(s, a) - oracle.w(s, a)) < 1e-6);
    }
  }
}

TEST_CASE("estimated ratios are near one when the policies agree") {
  const TabularMdp g = build_graph_env(6, 0.98);
  const StaticPolicy pi = make_static_policy(g, 0.5);
  const Dataset data = sample_dataset(g, pi, pi, 5000, 9);
  for (RatioMethod method : {RatioMethod::kModelBased, RatioMethod::kMinmaxTabular}) {
    const RatioTable w = estimate_ratio(data, method);
    const Table d = empirical_occupancy(data);
    for (int s = 0; s < g.n_states(); ++s) {
      for (int a = 0; a < 2; ++a) {
        if (d(s, a) > 0) CHECK(std::abs(w.w(s, a) - 1.0) < 0.05);
      }
    }
  }
}

TEST_CASE("minmax ratio is normalized and nonnegative") {
  for (const TabularMdp& m : {build_graph_env(8, 0.98), build_toy_mc_env(0.99)}) {
    const Dataset data = sample_dataset(m, make_static_policy(m, 0.5),
                                        make_static_policy(m, 0.9), 64, 3);
    const RatioTable w = estimate_ratio(data, RatioMethod::kMinmaxTabular);
    const Table d = empirical_occupancy(data);
    CHECK(std::abs((d.array() * w.w.array()).sum() - 1.0) < 1e-10);
    CHECK((w.w.array() >= 0.0).all());
    CHECK(w.kind == RatioKind::kMinmaxTabular);
    for (int s = 0; s < m.n_states(); ++s) {
      for (int a = 0; a < 2; ++a) {
        CHECK(w.support(s, a) == (d(s, a) > 0));
        if (!w.support(s, a)) CHECK(w.w(s, a) == 0.0);
      }
    }
  }
}

TEST_CASE("empirical occupancy is a discounted frequency") {
  const TabularMdp m = testing::deterministic_chain(3, 0.5);
  const StaticPolicy pi = make_static_policy(m, 1.0);
  const Dataset data = sample_dataset(m, pi, pi, 2, 0);
  const Table d = empirical_occupancy(data);
  CHECK(d(0, 0) == doctest::Approx(1.0 / 1.75));
  CHECK(d(1, 0) == doctest::Approx(0.5 / 1.75));
  CHECK(d(2, 0) == doctest::Approx(0.125 / 1.75));
}

TEST_CASE("text tables") {
  Table t(1, 2);
  t << 0.5, 2.0;
  Mask mask(1, 2);
  mask << true, false;
  std::ostringstream out;
  write_table(out, mask, t);
  CHECK(out.str() == "s,a,value\n0,0,0.5\n0,1,masked\n");
  std::ostringstream series;
  write_series(series, {t, t});
  CHECK(series.str() == "t,s,a,value\n1,0,0,0.5\n1,0,1,2\n2,0,0,0.5\n2,0,1,2\n");
}

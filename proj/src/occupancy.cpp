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

#include "sope/occupancy.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <utility>

#include "sope/error.hpp"

namespace sope {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

void require_shape(const TabularMdp& mdp, const StaticPolicy& policy) {
  require(policy.n_states() == mdp.n_states() &&
              policy.n_actions() == mdp.n_actions(),
          "policy shape does not match the mdp");
}

// M[(s', a'), (s, a)] = T(s' | s, a) pi(a' | s') over flattened pairs.
Eigen::MatrixXd pair_transition(const TabularMdp& mdp,
                                const StaticPolicy& policy) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(S * A, S * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const auto next = mdp.next_state_dist(s, a);
      for (int s2 = 0; s2 < S; ++s2) {
        if (next[s2] == 0.0) continue;
        for (int a2 = 0; a2 < A; ++a2) {
          m(s2 * A + a2, s * A + a) = next[s2] * policy.prob(s2, a2);
        }
      }
    }
  }
  return m;
}

Vector flatten(const Table& t) {
  return Eigen::Map<const Vector>(t.data(), t.size());
}

Table unflatten(const Vector& v, int rows, int cols) {
  return Eigen::Map<const Table>(v.data(), rows, cols);
}

Table initial_pairs(const TabularMdp& mdp, const StaticPolicy& policy) {
  Table d(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      d(s, a) = mdp.initial_dist()(s) * policy.prob(s, a);
    }
  }
  return d;
}

Table step_forward(const TabularMdp& mdp, const StaticPolicy& policy,
                   const Table& d) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  Vector next_state = Vector::Zero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double mass = d(s, a);
      if (mass == 0.0) continue;
      const auto row = mdp.next_state_dist(s, a);
      for (int s2 = 0; s2 < S; ++s2) next_state(s2) += mass * row[s2];
    }
  }
  Table out(S, A);
  for (int s2 = 0; s2 < S; ++s2) {
    for (int a2 = 0; a2 < A; ++a2) out(s2, a2) = next_state(s2) * policy.prob(s2, a2);
  }
  return out;
}

Table discounted_average(const std::vector<Table>& d_t, double gamma, int T) {
  Table sum = Table::Zero(d_t.front().rows(), d_t.front().cols());
  double weight = 0.0;
  double discount = 1.0;
  for (int t = 0; t < T; ++t) {
    sum += discount * d_t[t];
    weight += discount;
    discount *= gamma;
  }
  return sum / weight;
}

RatioTable ratio_of(const Table& num, const Table& den, RatioKind kind,
                    int steps, bool strict) {
  RatioTable out;
  out.kind = kind;
  out.steps = steps;
  out.w = Table::Zero(num.rows(), num.cols());
  out.support = Mask::Constant(num.rows(), num.cols(), false);
  for (int s = 0; s < num.rows(); ++s) {
    for (int a = 0; a < num.cols(); ++a) {
      if (den(s, a) > 0.0) {
        out.support(s, a) = true;
        out.w(s, a) = num(s, a) / den(s, a);
      } else if (strict && num(s, a) > 0.0) {
        throw SupportError("pi_e occupies (s=" + std::to_string(s) +
                           ", a=" + std::to_string(a) +
                           ") which pi_b never visits");
      }
    }
  }
  return out;
}

}  // namespace

const char* to_string(RatioKind kind) {
  switch (kind) {
    case RatioKind::kOracleAverage: return "oracle-average";
    case RatioKind::kOracleTruncated: return "oracle-truncated";
    case RatioKind::kOracleTimeIndexed: return "oracle-time-indexed";
    case RatioKind::kModelBased: return "model-based";
    case RatioKind::kMinmaxTabular: return "minmax-tabular";
  }
  return "unknown";
}

double RatioTable::at(int s, int a) const {
  if (!support(s, a)) throw MaskedRatioError(s, a);
  return w(s, a);
}

std::vector<Table> occupancy_t(const TabularMdp& mdp,
                               const StaticPolicy& policy) {
  require_shape(mdp, policy);
  std::vector<Table> d;
  d.reserve(mdp.horizon());
  d.push_back(initial_pairs(mdp, policy));
  for (int t = 1; t < mdp.horizon(); ++t) {
    d.push_back(step_forward(mdp, policy, d.back()));
  }
  return d;
}

Table occupancy_avg(const TabularMdp& mdp, const StaticPolicy& policy) {
  return discounted_average(occupancy_t(mdp, policy), mdp.gamma(), mdp.horizon());
}

Table occupancy_trunc(const TabularMdp& mdp, const StaticPolicy& policy,
                      int T) {
  require(T >= 1 && T <= mdp.horizon(), "occupancy_trunc: T out of [1, L]");
  return discounted_average(occupancy_t(mdp.with_horizon(T), policy),
                            mdp.gamma(), T);
}

OccupancyTables occupancy_tables(const TabularMdp& mdp,
                                 const StaticPolicy& policy) {
  OccupancyTables out;
  out.d_t = occupancy_t(mdp, policy);
  const int L = mdp.horizon();
  Table sum = Table::Zero(mdp.n_states(), mdp.n_actions());
  double weight = 0.0;
  double discount = 1.0;
  out.d_trunc.reserve(L);
  for (int t = 0; t < L; ++t) {
    sum += discount * out.d_t[t];
    weight += discount;
    out.j_value += discount * (out.d_t[t].array() * mdp.reward_table().array()).sum();
    discount *= mdp.gamma();
    out.d_trunc.push_back(sum / weight);
  }
  out.d_avg = out.d_trunc.back();
  return out;
}

Table stationary_occupancy(const TabularMdp& mdp, const StaticPolicy& policy) {
  require_shape(mdp, policy);
  require(mdp.gamma() < 1.0, "stationary occupancy needs gamma < 1");
  const double g = mdp.gamma();
  const Eigen::MatrixXd m = pair_transition(mdp, policy);
  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(m.rows(), m.cols()) - g * m;
  const Vector rhs = (1.0 - g) * flatten(initial_pairs(mdp, policy));
  const Vector d = lhs.partialPivLu().solve(rhs);
  return unflatten(d, mdp.n_states(), mdp.n_actions());
}

double bellman_residual_avg(const TabularMdp& mdp, const StaticPolicy& policy,
                            const Table& d) {
  require_shape(mdp, policy);
  require(d.rows() == mdp.n_states() && d.cols() == mdp.n_actions(),
          "bellman_residual_avg: table shape");
  const double g = mdp.gamma();
  const Vector x = flatten(d);
  const Vector rhs = (1.0 - g) * flatten(initial_pairs(mdp, policy)) +
                     g * (pair_transition(mdp, policy) * x);
  return (x - rhs).lpNorm<Eigen::Infinity>();
}

double exact_j(const TabularMdp& mdp, const StaticPolicy& policy) {
  const std::vector<Table> d = occupancy_t(mdp, policy);
  double j = 0.0;
  double discount = 1.0;
  for (const Table& dt : d) {
    j += discount * (dt.array() * mdp.reward_table().array()).sum();
    discount *= mdp.gamma();
  }
  return j;
}

QTable exact_q(const TabularMdp& mdp, const StaticPolicy& policy,
               HorizonMode mode) {
  require_shape(mdp, policy);
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const double g = mdp.gamma();
  QTable out;
  auto values = [&](const Table& q) {
    Vector v(S);
    for (int s = 0; s < S; ++s) v(s) = policy.table().row(s).dot(q.row(s));
    return v;
  };

  if (mode == HorizonMode::kInfinite) {
    require(g < 1.0, "exact_q: infinite horizon needs gamma < 1");
    const Eigen::MatrixXd m = pair_transition(mdp, policy);
    const Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(m.rows(), m.cols()) - g * m.transpose();
    const Vector q = lhs.partialPivLu().solve(flatten(mdp.reward_table()));
    out.q = unflatten(q, S, A);
  } else {
    Table q = mdp.reward_table();
    for (int t = mdp.horizon() - 1; t >= 1; --t) {
      const Vector v = values(q);
      Table prev(S, A);
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const auto row = mdp.next_state_dist(s, a);
          double next = 0.0;
          for (int s2 = 0; s2 < S; ++s2) next += row[s2] * v(s2);
          prev(s, a) = mdp.reward(s, a) + g * next;
        }
      }
      q = std::move(prev);
    }
    out.q = std::move(q);
  }
  // Absorbing states carry exactly zero value.
  for (int s : mdp.absorbing()) out.q.row(s).setZero();
  out.v = values(out.q);
  return out;
}

RatioTable oracle_ratio(const TabularMdp& mdp, const StaticPolicy& pi_e,
                        const StaticPolicy& pi_b, RatioKind kind, int step) {
  const int L = mdp.horizon();
  switch (kind) {
    case RatioKind::kOracleAverage:
      return ratio_of(occupancy_avg(mdp, pi_e), occupancy_avg(mdp, pi_b), kind,
                      L, true);
    case RatioKind::kOracleTruncated:
      require(step >= 1 && step <= L, "oracle_ratio: T out of [1, L]");
      return ratio_of(occupancy_trunc(mdp, pi_e, step),
                      occupancy_trunc(mdp, pi_b, step), kind, step, true);
    case RatioKind::kOracleTimeIndexed: {
      require(step >= 1 && step <= L, "oracle_ratio: t out of [1, L]");
      const TabularMdp cut = mdp.with_horizon(step);
      return ratio_of(occupancy_t(cut, pi_e).back(),
                      occupancy_t(cut, pi_b).back(), kind, step, true);
    }
    default:
      throw InvalidArgument(std::string("oracle_ratio: not an oracle kind: ") +
                            to_string(kind));
  }
}

std::vector<WeightedTrajectory> enumerate_trajectories(
    const TabularMdp& mdp, const StaticPolicy& pi_b, const StaticPolicy& pi_e,
    int length, std::size_t cap) {
  require_shape(mdp, pi_b);
  require_shape(mdp, pi_e);
  require(length >= 1, "enumerate_trajectories: length must be positive");
  std::vector<WeightedTrajectory> out;
  Trajectory prefix;

  auto recurse = [&](auto&& self, int s, double prob) -> void {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double pa = pi_b.prob(s, a);
      if (pa == 0.0) {
        if (pi_e.prob(s, a) > 0.0) check_support(pi_b, pi_e, std::span(&s, 1));
        continue;
      }
      prefix.states.push_back(s);
      prefix.actions.push_back(a);
      prefix.rewards.push_back(mdp.reward(s, a));
      prefix.rhos.push_back(pi_e.prob(s, a) / pa);
      if (prefix.length() == length) {
        if (out.size() >= cap) {
          throw InvalidArgument("enumerate_trajectories: more than " +
                                std::to_string(cap) + " prefixes");
        }
        out.push_back({prefix, prob * pa});
      } else {
        const auto next = mdp.next_state_dist(s, a);
        for (int s2 = 0; s2 < mdp.n_states(); ++s2) {
          if (next[s2] > 0.0) self(self, s2, prob * pa * next[s2]);
        }
      }
      prefix.states.pop_back();
      prefix.actions.pop_back();
      prefix.rewards.pop_back();
      prefix.rhos.pop_back();
    }
  };
  for (int s = 0; s < mdp.n_states(); ++s) {
    const double p0 = mdp.initial_dist()(s);
    if (p0 > 0.0) recurse(recurse, s, p0);
  }
  return out;
}

double conditional_ratio_bruteforce(const TabularMdp& mdp,
                                    const StaticPolicy& pi_e,
                                    const StaticPolicy& pi_b, int t, int s,
                                    int a, std::size_t cap) {
  require(t >= 1, "conditional_ratio_bruteforce: t must be positive");
  const auto prefixes =
      enumerate_trajectories(mdp.with_horizon(t), pi_b, pi_e, t, cap);
  double mass = 0.0;
  double weighted = 0.0;
  for (const auto& [traj, prob] : prefixes) {
    if (traj.states.back() != s || traj.actions.back() != a) continue;
    double rho = 1.0;
    for (double r : traj.rhos) rho *= r;
    mass += prob;
    weighted += prob * rho;
  }
  require(mass > 0.0, "conditional_ratio_bruteforce: (t, s, a) has zero "
                      "behavior occupancy");
  return weighted / mass;
}

Table empirical_occupancy(const Dataset& data) {
  const int S = data.pi_b.n_states();
  const int A = data.pi_b.n_actions();
  Table d = Table::Zero(S, A);
  for (const Trajectory& tr : data.trajectories) {
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      d(tr.states[t], tr.actions[t]) += discount;
      discount *= data.gamma;
    }
  }
  return d / d.sum();
}

EstimatedModel estimate_model(const Dataset& data, double smoothing) {
  require(data.size() >= 1, "estimate_model: empty dataset");
  require(smoothing >= 0.0, "estimate_model: negative smoothing");
  const int S = data.pi_b.n_states();
  const int A = data.pi_b.n_actions();

  std::vector<double> counts(static_cast<std::size_t>(S) * A * S, 0.0);
  Table reward_sum = Table::Zero(S, A);
  Table visit_count = Table::Zero(S, A);
  Table visits = Table::Zero(S, A);
  Vector starts = Vector::Zero(S);
  for (const Trajectory& tr : data.trajectories) {
    starts(tr.states.front()) += 1.0;
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      const int s = tr.states[t];
      const int a = tr.actions[t];
      reward_sum(s, a) += tr.rewards[t];
      visit_count(s, a) += 1.0;
      visits(s, a) += discount;
      discount *= data.gamma;
      if (t + 1 < tr.length()) {
        counts[(static_cast<std::size_t>(s) * A + a) * S + tr.states[t + 1]] += 1.0;
      }
    }
  }

  Mask fallback = Mask::Constant(S, A, false);
  std::vector<double> p(counts.size(), 0.0);
  Table reward = Table::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const std::size_t base = (static_cast<std::size_t>(s) * A + a) * S;
      double total = 0.0;
      for (int s2 = 0; s2 < S; ++s2) total += counts[base + s2];
      if (total == 0.0) {
        fallback(s, a) = true;
        p[base + s] = 1.0;
      } else {
        const double denom = total + smoothing * S;
        for (int s2 = 0; s2 < S; ++s2) {
          p[base + s2] = (counts[base + s2] + smoothing) / denom;
        }
      }
      if (visit_count(s, a) > 0.0) reward(s, a) = reward_sum(s, a) / visit_count(s, a);
    }
  }
  starts /= starts.sum();
  return {TabularMdp(S, A, std::move(p), std::move(reward), std::move(starts),
                     data.gamma, data.horizon),
          std::move(fallback), std::move(visits)};
}

namespace {

RatioTable minmax_tabular_ratio(const Dataset& data, double ridge) {
  const int S = data.pi_b.n_states();
  const int A = data.pi_b.n_actions();
  const int n = S * A;
  const double g = data.gamma;
  const StaticPolicy& pi_e = data.pi_e;

  // Sampled balance equations in count units. Row (s', a') reads
  //   n(s', a') w(s', a') - gamma * sum_{observed s -> s'} gamma^t w(s_t, a_t)
  //   pi_e(a' | s') = #starts(s') pi_e(a' | s').
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  for (const Trajectory& tr : data.trajectories) {
    const int s0 = tr.states.front();
    for (int a2 = 0; a2 < A; ++a2) rhs(s0 * A + a2) += pi_e.prob(s0, a2);
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      const int col = tr.states[t] * A + tr.actions[t];
      lhs(col, col) += discount;
      if (t + 1 < tr.length()) {
        const int s2 = tr.states[t + 1];
        for (int a2 = 0; a2 < A; ++a2) {
          lhs(s2 * A + a2, col) -= g * discount * pi_e.prob(s2, a2);
        }
      }
      discount *= g;
    }
  }

  const Eigen::MatrixXd normal =
      lhs.transpose() * lhs + ridge * Eigen::MatrixXd::Identity(n, n);
  const Eigen::LDLT<Eigen::MatrixXd> solver(normal);
  if (solver.info() != Eigen::Success || !solver.isPositive()) {
    throw Error("minmax-tabular: regularized normal equations are singular");
  }
  Vector w = solver.solve(lhs.transpose() * rhs);
  if (!w.allFinite()) {
    throw Error("minmax-tabular: solve produced non-finite ratios");
  }

  const Table d_b = empirical_occupancy(data);
  RatioTable out;
  out.kind = RatioKind::kMinmaxTabular;
  out.steps = data.horizon;
  out.w = Table::Zero(S, A);
  out.support = d_b.array() > 0.0;
  double mass = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (!out.support(s, a)) continue;
      out.w(s, a) = std::max(w(s * A + a), 0.0);
      mass += d_b(s, a) * out.w(s, a);
    }
  }
  if (!(mass > 0.0)) {
    throw Error("minmax-tabular: every ratio was clipped to zero");
  }
  out.w /= mass;
  return out;
}

}  // namespace

RatioTable estimate_ratio(const Dataset& data, RatioMethod method,
                          const RatioEstimateOptions& options) {
  require(data.size() >= 1, "estimate_ratio: empty dataset");
  if (method == RatioMethod::kMinmaxTabular) {
    return minmax_tabular_ratio(data, options.ridge);
  }
  const EstimatedModel model = estimate_model(data, options.smoothing);
  return ratio_of(occupancy_avg(model.mdp, data.pi_e),
                  occupancy_avg(model.mdp, data.pi_b), RatioKind::kModelBased,
                  data.horizon, false);
}

void write_table(std::ostream& out, const Table& table) {
  write_table(out, Mask::Constant(table.rows(), table.cols(), true), table);
}

void write_table(std::ostream& out, const Mask& support, const Table& table) {
  const auto old = out.precision(17);
  out << "s,a,value\n";
  for (int s = 0; s < table.rows(); ++s) {
    for (int a = 0; a < table.cols(); ++a) {
      out << s << ',' << a << ',';
      if (support(s, a)) {
        out << table(s, a);
      } else {
        out << "masked";
      }
      out << '\n';
    }
  }
  out.precision(old);
}

void write_series(std::ostream& out, const std::vector<Table>& series,
                  const char* index_name) {
  const auto old = out.precision(17);
  out << index_name << ",s,a,value\n";
  for (std::size_t t = 0; t < series.size(); ++t) {
    for (int s = 0; s < series[t].rows(); ++s) {
      for (int a = 0; a < series[t].cols(); ++a) {
        out << t + 1 << ',' << s << ',' << a << ',' << series[t](s, a) << '\n';
      }
    }
  }
  out.precision(old);
}

}  // namespace sope

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

#ifndef SOPE_MDP_HPP_
#define SOPE_MDP_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sope {

// Row-major so that a state's row of an (s, a) table is contiguous.
using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Finite MDP with expected rewards r(s, a), fixed horizon and discount.
//
// The transition tensor is stored flat with index (s * n_actions + a) *
// n_states + s'. Construction validates row stochasticity, normalization of
// the initial distribution and closure of absorbing states; instances are
// immutable afterwards.
class TabularMdp {
 public:
  TabularMdp(int n_states, int n_actions, std::vector<double> transitions,
             Table reward, Vector initial_dist, double gamma, int horizon,
             std::vector<int> absorbing = {});

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  int horizon() const { return horizon_; }

  double transition(int s, int a, int next) const {
    return transition_[index(s, a) * n_states_ + next];
  }
  std::span<const double> next_state_dist(int s, int a) const {
    return {transition_.data() + index(s, a) * n_states_,
            static_cast<std::size_t>(n_states_)};
  }
  const std::vector<double>& transition_tensor() const { return transition_; }

  double reward(int s, int a) const { return reward_(s, a); }
  const Table& reward_table() const { return reward_; }
  const Vector& initial_dist() const { return initial_; }

  const std::vector<int>& absorbing() const { return absorbing_; }
  bool is_absorbing(int s) const;

  // Same dynamics with a different horizon.
  TabularMdp with_horizon(int horizon) const;
  TabularMdp with_gamma(double gamma) const;

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions_ + a;
  }

  int n_states_;
  int n_actions_;
  std::vector<double> transition_;
  Table reward_;
  Vector initial_;
  double gamma_;
  int horizon_;
  std::vector<int> absorbing_;
};

// Per-state action distribution.
class StaticPolicy {
 public:
  explicit StaticPolicy(Table probs);

  int n_states() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }
  double prob(int s, int a) const { return probs_(s, a); }
  std::span<const double> action_dist(int s) const {
    return {probs_.data() + static_cast<std::size_t>(s) * probs_.cols(),
            static_cast<std::size_t>(probs_.cols())};
  }
  const Table& table() const { return probs_; }

 private:
  Table probs_;
};

struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  // rhos[t] = pi_e(a_t | s_t) / pi_b(a_t | s_t).
  std::vector<double> rhos;

  int length() const { return static_cast<int>(states.size()); }
  bool operator==(const Trajectory&) const = default;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  StaticPolicy pi_b;
  StaticPolicy pi_e;
  double gamma;
  int horizon;
  std::int64_t seed;

  int size() const { return static_cast<int>(trajectories.size()); }
};

// Two-chain graph: start 0, top chain on odd labels, bottom chain on even
// labels, absorbing state 2 * chain_len. The intended chain is reached with
// probability 0.75. Rewards are the expected +1/-1 entry reward of r(s, a).
TabularMdp build_graph_env(int chain_len, double gamma);

// 21-state toy mountain car. a = 0 moves right, a = 1 moves left (clamped at
// the left wall), state 20 is the terminal absorbing state. Starts are
// uniform over the 20 non-terminal states. Horizon 100.
TabularMdp build_toy_mc_env(double gamma);

inline constexpr double kGraphSuccessProb = 0.75;
inline constexpr int kToyMcStates = 21;
inline constexpr int kToyMcHorizon = 100;

// Two-action policy choosing a = 0 with probability p_action0 everywhere.
StaticPolicy make_static_policy(int n_states, double p_action0);
// As above but uniform on the absorbing states of `mdp`, so that padding
// steps carry rho = 1.
StaticPolicy make_static_policy(const TabularMdp& mdp, double p_action0);

// Throws SupportError if pi_e puts mass on an action pi_b never takes in a
// state with positive reachability. Checks every state when `states` is
// empty.
void check_support(const StaticPolicy& pi_b, const StaticPolicy& pi_e,
                   std::span<const int> states = {});

// Length-horizon rollout under pi_b annotated with pi_e ratios. Pure in seed.
Trajectory sample_trajectory(const TabularMdp& mdp, const StaticPolicy& pi_b,
                             const StaticPolicy& pi_e, std::int64_t rng_seed);

// Trajectory i uses seed base_seed + i.
Dataset sample_dataset(const TabularMdp& mdp, const StaticPolicy& pi_b,
                       const StaticPolicy& pi_e, int m,
                       std::int64_t base_seed);

// First `steps` steps of every trajectory.
Dataset truncate_dataset(const Dataset& data, int steps);

}  // namespace sope

#endif  // SOPE_MDP_HPP_

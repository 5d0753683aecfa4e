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

#include "sope/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "sope/error.hpp"
#include "sope/rng.hpp"

namespace sope {
namespace {

constexpr double kSumTolerance = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

TabularMdp::TabularMdp(int n_states, int n_actions,
                       std::vector<double> transitions, Table reward,
                       Vector initial_dist, double gamma, int horizon,
                       std::vector<int> absorbing)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transitions)),
      reward_(std::move(reward)),
      initial_(std::move(initial_dist)),
      gamma_(gamma),
      horizon_(horizon),
      absorbing_(std::move(absorbing)) {
  require(n_states_ > 0 && n_actions_ > 0, "mdp: empty state or action set");
  require(transition_.size() ==
              static_cast<std::size_t>(n_states_) * n_actions_ * n_states_,
          "mdp: transition tensor has wrong size");
  require(reward_.rows() == n_states_ && reward_.cols() == n_actions_,
          "mdp: reward table has wrong shape");
  require(initial_.size() == n_states_, "mdp: initial distribution size");
  require(gamma_ > 0.0 && gamma_ <= 1.0, "mdp: gamma must lie in (0, 1]");
  require(horizon_ >= 1, "mdp: horizon must be positive");

  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      double sum = 0.0;
      for (double p : next_state_dist(s, a)) {
        require(p >= 0.0, "mdp: negative transition probability");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= kSumTolerance,
              "mdp: transition row (" + std::to_string(s) + ", " +
                  std::to_string(a) + ") does not sum to 1");
      require(std::isfinite(reward_(s, a)), "mdp: non-finite reward");
    }
  }
  require((initial_.array() >= 0.0).all() &&
              std::abs(initial_.sum() - 1.0) <= kSumTolerance,
          "mdp: initial distribution is not a probability vector");

  std::sort(absorbing_.begin(), absorbing_.end());
  absorbing_.erase(std::unique(absorbing_.begin(), absorbing_.end()),
                   absorbing_.end());
  for (int s : absorbing_) {
    require(s >= 0 && s < n_states_, "mdp: absorbing state out of range");
    for (int a = 0; a < n_actions_; ++a) {
      require(transition(s, a, s) == 1.0 && reward_(s, a) == 0.0,
              "mdp: absorbing state " + std::to_string(s) +
                  " must self-loop with zero reward");
    }
  }
}

bool TabularMdp::is_absorbing(int s) const {
  return std::binary_search(absorbing_.begin(), absorbing_.end(), s);
}

TabularMdp TabularMdp::with_horizon(int horizon) const {
  return TabularMdp(n_states_, n_actions_, transition_, reward_, initial_,
                    gamma_, horizon, absorbing_);
}

TabularMdp TabularMdp::with_gamma(double gamma) const {
  return TabularMdp(n_states_, n_actions_, transition_, reward_, initial_,
                    gamma, horizon_, absorbing_);
}

StaticPolicy::StaticPolicy(Table probs) : probs_(std::move(probs)) {
  require(probs_.rows() > 0 && probs_.cols() > 0, "policy: empty table");
  for (int s = 0; s < probs_.rows(); ++s) {
    require((probs_.row(s).array() >= 0.0).all(),
            "policy: negative probability in state " + std::to_string(s));
    require(std::abs(probs_.row(s).sum() - 1.0) <= kSumTolerance,
            "policy: row " + std::to_string(s) + " does not sum to 1");
  }
}

TabularMdp build_graph_env(int chain_len, double gamma) {
  require(chain_len >= 2, "graph: chain_len must be at least 2");
  const int L = chain_len;
  const int n = 2 * L + 1;
  const int absorbing = 2 * L;
  // Label 2L-1 is never entered (the chains end at 2L-3 and 2L-2); it is
  // kept as a closed state so that labels follow the usual numbering.
  const int unused = 2 * L - 1;

  std::vector<double> p(static_cast<std::size_t>(n) * 2 * n, 0.0);
  Table reward = Table::Zero(n, 2);
  auto set = [&](int s, int a, int next, double prob) {
    p[(static_cast<std::size_t>(s) * 2 + a) * n + next] += prob;
  };
  const double hit = kGraphSuccessProb;
  const double slip = 1.0 - kGraphSuccessProb;

  // Position k holds state 0 for k = 0 and states {2k-1, 2k} otherwise.
  for (int k = 0; k < L; ++k) {
    std::vector<int> here = k == 0 ? std::vector<int>{0}
                                   : std::vector<int>{2 * k - 1, 2 * k};
    for (int s : here) {
      if (k + 1 < L) {
        const int top = 2 * k + 1;
        const int bottom = 2 * k + 2;
        set(s, 0, top, hit);
        set(s, 0, bottom, slip);
        set(s, 1, bottom, hit);
        set(s, 1, top, slip);
        reward(s, 0) = hit - slip;
        reward(s, 1) = slip - hit;
      } else {
        // Entering the absorbing state is not a top-chain entry.
        for (int a = 0; a < 2; ++a) {
          set(s, a, absorbing, 1.0);
          reward(s, a) = -1.0;
        }
      }
    }
  }
  for (int s : {unused, absorbing}) {
    for (int a = 0; a < 2; ++a) set(s, a, s, 1.0);
  }

  Vector init = Vector::Zero(n);
  init(0) = 1.0;
  return TabularMdp(n, 2, std::move(p), std::move(reward), std::move(init),
                    gamma, L, {unused, absorbing});
}

TabularMdp build_toy_mc_env(double gamma) {
  const int n = kToyMcStates;
  const int terminal = n - 1;
  std::vector<double> p(static_cast<std::size_t>(n) * 2 * n, 0.0);
  Table reward = Table::Zero(n, 2);
  for (int s = 0; s < n; ++s) {
    if (s == terminal) {
      for (int a = 0; a < 2; ++a) p[(s * 2 + a) * n + s] = 1.0;
      continue;
    }
    p[(s * 2 + 0) * n + (s + 1)] = 1.0;
    p[(s * 2 + 1) * n + std::max(s - 1, 0)] = 1.0;
    reward(s, 0) = -1.0;
    reward(s, 1) = -1.0;
  }
  Vector init = Vector::Constant(n, 1.0 / terminal);
  init(terminal) = 0.0;
  return TabularMdp(n, 2, std::move(p), std::move(reward), std::move(init),
                    gamma, kToyMcHorizon, {terminal});
}

StaticPolicy make_static_policy(int n_states, double p_action0) {
  require(n_states > 0, "policy: n_states must be positive");
  require(p_action0 >= 0.0 && p_action0 <= 1.0,
          "policy: p_action0 must lie in [0, 1]");
  Table probs(n_states, 2);
  probs.col(0).setConstant(p_action0);
  probs.col(1).setConstant(1.0 - p_action0);
  return StaticPolicy(std::move(probs));
}

StaticPolicy make_static_policy(const TabularMdp& mdp, double p_action0) {
  require(mdp.n_actions() == 2, "policy: static policies need two actions");
  Table probs = make_static_policy(mdp.n_states(), p_action0).table();
  for (int s : mdp.absorbing()) probs.row(s).setConstant(0.5);
  return StaticPolicy(std::move(probs));
}

void check_support(const StaticPolicy& pi_b, const StaticPolicy& pi_e,
                   std::span<const int> states) {
  require(pi_b.n_states() == pi_e.n_states() &&
              pi_b.n_actions() == pi_e.n_actions(),
          "policies have different shapes");
  auto check_state = [&](int s) {
    for (int a = 0; a < pi_b.n_actions(); ++a) {
      if (pi_e.prob(s, a) > 0.0 && pi_b.prob(s, a) == 0.0) {
        throw SupportError("pi_e(a=" + std::to_string(a) + " | s=" +
                           std::to_string(s) +
                           ") > 0 but the behavior policy never takes it");
      }
    }
  };
  if (states.empty()) {
    for (int s = 0; s < pi_b.n_states(); ++s) check_state(s);
  } else {
    for (int s : states) check_state(s);
  }
}

Trajectory sample_trajectory(const TabularMdp& mdp, const StaticPolicy& pi_b,
                             const StaticPolicy& pi_e, std::int64_t rng_seed) {
  require(pi_b.n_states() == mdp.n_states() &&
              pi_e.n_states() == mdp.n_states() &&
              pi_b.n_actions() == mdp.n_actions() &&
              pi_e.n_actions() == mdp.n_actions(),
          "policy shape does not match the mdp");
  Rng rng(static_cast<std::uint64_t>(rng_seed));
  const int L = mdp.horizon();
  Trajectory traj;
  traj.states.reserve(L);
  traj.actions.reserve(L);
  traj.rewards.reserve(L);
  traj.rhos.reserve(L);

  const Vector& init = mdp.initial_dist();
  int s = rng.categorical({init.data(), static_cast<std::size_t>(init.size())});
  for (int t = 0; t < L; ++t) {
    const int visited[] = {s};
    check_support(pi_b, pi_e, visited);
    const int a = rng.categorical(pi_b.action_dist(s));
    traj.states.push_back(s);
    traj.actions.push_back(a);
    traj.rewards.push_back(mdp.reward(s, a));
    traj.rhos.push_back(pi_e.prob(s, a) / pi_b.prob(s, a));
    s = rng.categorical(mdp.next_state_dist(s, a));
  }
  return traj;
}

Dataset sample_dataset(const TabularMdp& mdp, const StaticPolicy& pi_b,
                       const StaticPolicy& pi_e, int m,
                       std::int64_t base_seed) {
  require(m >= 1, "dataset: m must be at least 1");
  Dataset data{{}, pi_b, pi_e, mdp.gamma(), mdp.horizon(), base_seed};
  data.trajectories.reserve(m);
  for (int i = 0; i < m; ++i) {
    data.trajectories.push_back(sample_trajectory(mdp, pi_b, pi_e, base_seed + i));
  }
  return data;
}

Dataset truncate_dataset(const Dataset& data, int steps) {
  require(steps >= 1 && steps <= data.horizon,
          "truncate: steps must lie in [1, horizon]");
  Dataset out{{}, data.pi_b, data.pi_e, data.gamma, steps, data.seed};
  out.trajectories.reserve(data.trajectories.size());
  for (const Trajectory& tr : data.trajectories) {
    Trajectory cut;
    cut.states.assign(tr.states.begin(), tr.states.begin() + steps);
    cut.actions.assign(tr.actions.begin(), tr.actions.begin() + steps);
    cut.rewards.assign(tr.rewards.begin(), tr.rewards.begin() + steps);
    cut.rhos.assign(tr.rhos.begin(), tr.rhos.begin() + steps);
    out.trajectories.push_back(std::move(cut));
  }
  return out;
}

}  // namespace sope

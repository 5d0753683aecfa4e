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

#include "sope/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "sope/error.hpp"
#include "sope/rng.hpp"

namespace sope {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

// Below these the sliding window product is rebuilt instead of divided.
constexpr double kMinDivisor = 1e-12;
constexpr double kMinWindow = 1e-300;

// Produces w(1, n), w(2, n), ... for one trajectory in O(1) amortized per
// step. The trailing product rho_{t-n+1:t} is kept incrementally.
class SpectrumWeights {
 public:
  SpectrumWeights(const Trajectory& traj, int n, const RatioTable* ratio)
      : traj_(traj), n_(n), ratio_(ratio) {}

  double next() {
    const int i = t_++;  // zero-based index of step t_ (one-based)
    const int t = t_;
    if (n_ == 0) return ratio_->at(traj_.states[i], traj_.actions[i]);
    window_ *= traj_.rhos[i];
    if (t <= n_) return window_;
    const double dropped = traj_.rhos[t - n_ - 1];
    if (dropped < kMinDivisor || window_ < kMinWindow) {
      window_ = 1.0;
      for (int j = t - n_; j < t; ++j) window_ *= traj_.rhos[j];
    } else {
      window_ /= dropped;
    }
    const int anchor = t - n_ - 1;
    return ratio_->at(traj_.states[anchor], traj_.actions[anchor]) * window_;
  }

 private:
  const Trajectory& traj_;
  int n_;
  const RatioTable* ratio_;
  int t_ = 0;
  double window_ = 1.0;
};

void check_dataset(const Dataset& data) {
  require(data.size() >= 1, "estimator: empty dataset");
  for (const Trajectory& tr : data.trajectories) {
    require(tr.length() == data.horizon &&
                static_cast<int>(tr.actions.size()) == data.horizon &&
                static_cast<int>(tr.rewards.size()) == data.horizon &&
                static_cast<int>(tr.rhos.size()) == data.horizon,
            "estimator: trajectory length differs from the dataset horizon");
  }
}

void check_ratio_shape(const Dataset& data, const RatioTable& ratio) {
  require(ratio.n_states() == data.pi_b.n_states() &&
              ratio.n_actions() == data.pi_b.n_actions(),
          "estimator: ratio table shape does not match the policies");
}

void check_spectrum(const Dataset& data, int n, const RatioTable* ratio,
                    RatioMode mode) {
  check_dataset(data);
  const int L = data.horizon;
  require(n >= 0 && n <= L, "estimator: n=" + std::to_string(n) +
                                " outside [0, " + std::to_string(L) + "]");
  if (n == L) return;
  require(ratio != nullptr, "estimator: n < L needs a ratio table");
  check_ratio_shape(data, *ratio);
  require(ratio->kind != RatioKind::kOracleTimeIndexed,
          "estimator: a time-indexed ratio cannot serve every step");
  const int expected = mode == RatioMode::kAverage ? L : L - n;
  require(ratio->steps == expected,
          "estimator: ratio averages over " + std::to_string(ratio->steps) +
              " steps, expected " + std::to_string(expected));
}

Estimate from_per_trajectory(std::vector<double> values, double max_weight) {
  Estimate out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.value = sum / static_cast<double>(values.size());
  out.per_trajectory = std::move(values);
  out.diagnostics.max_weight = max_weight;
  return out;
}

// Shared by every self-normalized estimator: weights[i][t] is the weight of
// trajectory i at zero-based step t.
Estimate self_normalized(const Dataset& data,
                         const std::vector<std::vector<double>>& weights) {
  const int L = data.horizon;
  Estimate out;
  out.diagnostics.ess.assign(L, 0.0);
  double discount = 1.0;
  for (int t = 0; t < L; ++t) {
    double num = 0.0;
    double den = 0.0;
    double sq = 0.0;
    for (int i = 0; i < data.size(); ++i) {
      const double w = weights[i][t];
      num += w * data.trajectories[i].rewards[t];
      den += w;
      sq += w * w;
      out.diagnostics.max_weight = std::max(out.diagnostics.max_weight, w);
    }
    if (!(den > 0.0)) throw ZeroDenominatorError(t + 1);
    out.value += discount * (num / den);
    out.diagnostics.ess[t] = den * den / sq;
    discount *= data.gamma;
  }
  return out;
}

std::vector<std::vector<double>> spectrum_weights(const Dataset& data, int n,
                                                  const RatioTable* ratio) {
  std::vector<std::vector<double>> weights(data.size());
  for (int i = 0; i < data.size(); ++i) {
    SpectrumWeights stream(data.trajectories[i], n, ratio);
    weights[i].resize(data.horizon);
    for (int t = 0; t < data.horizon; ++t) weights[i][t] = stream.next();
  }
  return weights;
}

}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::kIS: return "IS";
    case Family::kPDIS: return "PDIS";
    case Family::kSIS: return "SIS";
    case Family::kWSIS: return "WSIS";
    case Family::kSOPE: return "SOPE";
    case Family::kCWPDIS: return "CWPDIS";
    case Family::kWSOPE: return "WSOPE";
    case Family::kDRSOPE: return "DRSOPE";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  for (Family f : {Family::kIS, Family::kPDIS, Family::kSIS, Family::kWSIS,
                   Family::kSOPE, Family::kCWPDIS, Family::kWSOPE,
                   Family::kDRSOPE}) {
    if (key == to_string(f)) return f;
  }
  throw InvalidArgument("unknown estimator family '" + name + "'");
}

bool is_spectrum(Family family) {
  return family == Family::kSOPE || family == Family::kWSOPE ||
         family == Family::kDRSOPE;
}

bool is_weighted(Family family) {
  return family == Family::kWSIS || family == Family::kCWPDIS ||
         family == Family::kWSOPE;
}

double weight_wtn(const Trajectory& traj, int t, int n, const RatioTable* ratio) {
  require(t >= 0 && t <= traj.length(), "weight_wtn: t out of range");
  require(n >= 0, "weight_wtn: negative n");
  if (t == 0) return 1.0;
  double product = 1.0;
  if (t <= n) {
    for (int j = 0; j < t; ++j) product *= traj.rhos[j];
    return product;
  }
  require(ratio != nullptr, "weight_wtn: t > n needs a ratio table");
  for (int j = t - n; j < t; ++j) product *= traj.rhos[j];
  return ratio->at(traj.states[t - n - 1], traj.actions[t - n - 1]) * product;
}

Estimate estimate_is(const Dataset& data) {
  check_dataset(data);
  std::vector<double> values;
  values.reserve(data.size());
  double max_weight = 0.0;
  for (const Trajectory& tr : data.trajectories) {
    double rho = 1.0;
    double ret = 0.0;
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      rho *= tr.rhos[t];
      ret += discount * tr.rewards[t];
      discount *= data.gamma;
    }
    max_weight = std::max(max_weight, rho);
    values.push_back(rho * ret);
  }
  return from_per_trajectory(std::move(values), max_weight);
}

Estimate estimate_pdis(const Dataset& data) {
  check_dataset(data);
  std::vector<double> values;
  values.reserve(data.size());
  double max_weight = 0.0;
  for (const Trajectory& tr : data.trajectories) {
    double rho = 1.0;
    double total = 0.0;
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      rho *= tr.rhos[t];
      max_weight = std::max(max_weight, rho);
      total += discount * rho * tr.rewards[t];
      discount *= data.gamma;
    }
    values.push_back(total);
  }
  return from_per_trajectory(std::move(values), max_weight);
}

Estimate estimate_sis(const Dataset& data, const RatioTable& ratio) {
  check_dataset(data);
  check_ratio_shape(data, ratio);
  std::vector<double> values;
  values.reserve(data.size());
  double max_weight = 0.0;
  for (const Trajectory& tr : data.trajectories) {
    double total = 0.0;
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      const double w = ratio.at(tr.states[t], tr.actions[t]);
      max_weight = std::max(max_weight, w);
      total += discount * w * tr.rewards[t];
      discount *= data.gamma;
    }
    values.push_back(total);
  }
  return from_per_trajectory(std::move(values), max_weight);
}

Estimate estimate_sope(const Dataset& data, int n, const RatioTable* ratio,
                       RatioMode mode) {
  check_spectrum(data, n, ratio, mode);
  std::vector<double> values;
  values.reserve(data.size());
  double max_weight = 0.0;
  for (const Trajectory& tr : data.trajectories) {
    SpectrumWeights stream(tr, n, ratio);
    double total = 0.0;
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      const double w = stream.next();
      max_weight = std::max(max_weight, w);
      total += discount * w * tr.rewards[t];
      discount *= data.gamma;
    }
    values.push_back(total);
  }
  return from_per_trajectory(std::move(values), max_weight);
}

Estimate estimate_cwpdis(const Dataset& data) {
  check_dataset(data);
  std::vector<std::vector<double>> weights(data.size());
  for (int i = 0; i < data.size(); ++i) {
    const Trajectory& tr = data.trajectories[i];
    weights[i].resize(tr.length());
    double rho = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      rho *= tr.rhos[t];
      weights[i][t] = rho;
    }
  }
  return self_normalized(data, weights);
}

Estimate estimate_weighted_sis(const Dataset& data, const RatioTable& ratio) {
  check_dataset(data);
  check_ratio_shape(data, ratio);
  std::vector<std::vector<double>> weights(data.size());
  for (int i = 0; i < data.size(); ++i) {
    const Trajectory& tr = data.trajectories[i];
    weights[i].resize(tr.length());
    for (int t = 0; t < tr.length(); ++t) {
      weights[i][t] = ratio.at(tr.states[t], tr.actions[t]);
    }
  }
  return self_normalized(data, weights);
}

Estimate estimate_wsope(const Dataset& data, int n, const RatioTable* ratio,
                        RatioMode mode) {
  check_spectrum(data, n, ratio, mode);
  return self_normalized(data, spectrum_weights(data, n, ratio));
}

Estimate estimate_dr_sope(const Dataset& data, int n, const RatioTable* ratio,
                          const QTable& q, const DrOptions& options) {
  check_spectrum(data, n, ratio, options.mode);
  require(q.q.rows() == data.pi_e.n_states() &&
              q.q.cols() == data.pi_e.n_actions() &&
              q.v.size() == data.pi_e.n_states(),
          "dr: q table shape does not match the policies");
  const bool sampled = options.next_action == NextAction::kSampled;
  Rng rng(options.seed);
  auto successor = [&](int s) {
    if (!sampled) return q.v(s);
    return q.q(s, rng.categorical(data.pi_e.action_dist(s)));
  };

  std::vector<double> values;
  values.reserve(data.size());
  double max_weight = 0.0;
  for (const Trajectory& tr : data.trajectories) {
    SpectrumWeights stream(tr, n, ratio);
    double total = successor(tr.states[0]);
    double discount = 1.0;
    for (int t = 0; t < tr.length(); ++t) {
      const double w = stream.next();
      max_weight = std::max(max_weight, w);
      const double next =
          t + 1 < tr.length() ? data.gamma * successor(tr.states[t + 1]) : 0.0;
      const double td = tr.rewards[t] + next - q.q(tr.states[t], tr.actions[t]);
      total += discount * w * td;
      discount *= data.gamma;
    }
    values.push_back(total);
  }
  return from_per_trajectory(std::move(values), max_weight);
}

Estimate evaluate(const Dataset& data, const EstimatorSpec& spec) {
  switch (spec.family) {
    case Family::kIS: return estimate_is(data);
    case Family::kPDIS: return estimate_pdis(data);
    case Family::kSIS:
      require(spec.ratio != nullptr, "SIS needs a ratio table");
      return estimate_sis(data, *spec.ratio);
    case Family::kWSIS:
      require(spec.ratio != nullptr, "WSIS needs a ratio table");
      return estimate_weighted_sis(data, *spec.ratio);
    case Family::kSOPE:
      return estimate_sope(data, spec.n, spec.ratio, spec.ratio_mode);
    case Family::kCWPDIS: return estimate_cwpdis(data);
    case Family::kWSOPE:
      return estimate_wsope(data, spec.n, spec.ratio, spec.ratio_mode);
    case Family::kDRSOPE:
      require(spec.q != nullptr, "DRSOPE needs a q table");
      return estimate_dr_sope(data, spec.n, spec.ratio, *spec.q,
                              {spec.next_action, spec.seed, spec.ratio_mode});
  }
  throw InvalidArgument("unknown estimator family");
}

}  // namespace sope

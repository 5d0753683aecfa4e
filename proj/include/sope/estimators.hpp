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

#ifndef SOPE_ESTIMATORS_HPP_
#define SOPE_ESTIMATORS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sope/mdp.hpp"
#include "sope/occupancy.hpp"

namespace sope {

enum class Family { kIS, kPDIS, kSIS, kWSIS, kSOPE, kCWPDIS, kWSOPE, kDRSOPE };

const char* to_string(Family family);
// Accepts the names produced by to_string (case-insensitive, '-' ignored).
Family parse_family(const std::string& name);
// True for the families indexed by n.
bool is_spectrum(Family family);
// True for the self-normalized families.
bool is_weighted(Family family);

// How the ratio passed to a spectrum estimator was built. kAverage uses one
// d_{1:L} ratio for every n. kTruncated expects d_{1:L-n}.
enum class RatioMode { kAverage, kTruncated };

// Successor value in DR: v(s') or q(s', a') with a' ~ pi_e.
enum class NextAction { kExpectation, kSampled };

struct Diagnostics {
  double max_weight = 0.0;
  // Kish effective sample size (sum w)^2 / sum w^2 per time step; filled by
  // the self-normalized estimators only.
  std::vector<double> ess;
};

struct Estimate {
  double value = 0.0;
  // Per-trajectory contributions of the unweighted estimators; value is their
  // mean. Absent for self-normalized estimators.
  std::optional<std::vector<double>> per_trajectory;
  Diagnostics diagnostics;
};

// w(t, n) for a 1-based time t. Uses ratio only when t > n, in which case
// ratio must be non-null.
double weight_wtn(const Trajectory& traj, int t, int n, const RatioTable* ratio);

Estimate estimate_is(const Dataset& data);
Estimate estimate_pdis(const Dataset& data);
Estimate estimate_sis(const Dataset& data, const RatioTable& ratio);

// `ratio` may be null when n >= L.
Estimate estimate_sope(const Dataset& data, int n, const RatioTable* ratio,
                       RatioMode mode = RatioMode::kAverage);

Estimate estimate_cwpdis(const Dataset& data);
// Per-time self-normalized SIS.
Estimate estimate_weighted_sis(const Dataset& data, const RatioTable& ratio);
Estimate estimate_wsope(const Dataset& data, int n, const RatioTable* ratio,
                        RatioMode mode = RatioMode::kAverage);

struct DrOptions {
  NextAction next_action = NextAction::kExpectation;
  // Seed for the pi_e action draws of kSampled.
  std::uint64_t seed = 0;
  RatioMode mode = RatioMode::kAverage;
};

// q must be the q-table of pi_e (v consistent with pi_e). The successor
// value past the last step is 0.
Estimate estimate_dr_sope(const Dataset& data, int n, const RatioTable* ratio,
                          const QTable& q, const DrOptions& options = {});

struct EstimatorSpec {
  Family family = Family::kPDIS;
  int n = 0;
  const RatioTable* ratio = nullptr;
  RatioMode ratio_mode = RatioMode::kAverage;
  const QTable* q = nullptr;
  NextAction next_action = NextAction::kExpectation;
  std::uint64_t seed = 0;
};

Estimate evaluate(const Dataset& data, const EstimatorSpec& spec);

}  // namespace sope

#endif  // SOPE_ESTIMATORS_HPP_

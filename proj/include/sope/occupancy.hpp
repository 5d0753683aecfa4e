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

#ifndef SOPE_OCCUPANCY_HPP_
#define SOPE_OCCUPANCY_HPP_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sope/mdp.hpp"

namespace sope {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Exact occupancies of one policy. d_t[t - 1] is the (s, a) distribution at
// time t; d_trunc[T - 1] is the discounted average over times 1..T.
struct OccupancyTables {
  std::vector<Table> d_t;
  Table d_avg;
  std::vector<Table> d_trunc;
  double j_value = 0.0;
};

enum class RatioKind {
  kOracleAverage,
  kOracleTruncated,
  kOracleTimeIndexed,
  kModelBased,
  kMinmaxTabular,
};

const char* to_string(RatioKind kind);

// Density ratio w(s, a) with an explicit support mask. Entries outside the
// support are 0 and must never be read through at().
struct RatioTable {
  Table w;
  Mask support;
  RatioKind kind = RatioKind::kOracleAverage;
  // Number of leading time steps the ratio averages over (T of d_{1:T}), or
  // the time index t for kOracleTimeIndexed.
  int steps = 0;

  // Throws MaskedRatioError off the support.
  double at(int s, int a) const;
  int n_states() const { return static_cast<int>(w.rows()); }
  int n_actions() const { return static_cast<int>(w.cols()); }
};

struct QTable {
  Table q;
  // v(s) = sum_a pi(a | s) q(s, a).
  Vector v;
};

enum class HorizonMode { kInfinite, kFinite };

// d_t for t = 1..horizon by forward recursion.
std::vector<Table> occupancy_t(const TabularMdp& mdp, const StaticPolicy& policy);

// Discounted time average over 1..horizon (resp. 1..T), normalized by the
// sum of discounts.
Table occupancy_avg(const TabularMdp& mdp, const StaticPolicy& policy);
Table occupancy_trunc(const TabularMdp& mdp, const StaticPolicy& policy, int T);

OccupancyTables occupancy_tables(const TabularMdp& mdp, const StaticPolicy& policy);

// Fixed point of d = (1 - gamma) d_1 pi + gamma P_pi d, by a dense solve.
// Requires gamma < 1.
Table stationary_occupancy(const TabularMdp& mdp, const StaticPolicy& policy);

// Max-norm residual of `d` in the equation above.
double bellman_residual_avg(const TabularMdp& mdp, const StaticPolicy& policy,
                            const Table& d);

double exact_j(const TabularMdp& mdp, const StaticPolicy& policy);

// kInfinite solves q = r + gamma P v (gamma < 1). kFinite runs the
// horizon-length backward recursion and returns its first slice.
QTable exact_q(const TabularMdp& mdp, const StaticPolicy& policy,
               HorizonMode mode);

// Elementwise ratio of pi_e and pi_b occupancies. `step` is T for
// kOracleTruncated and t for kOracleTimeIndexed, ignored otherwise.
RatioTable oracle_ratio(const TabularMdp& mdp, const StaticPolicy& pi_e,
                        const StaticPolicy& pi_b, RatioKind kind, int step = 0);

// ---------------------------------------------------------------------------
// Brute force.

struct WeightedTrajectory {
  Trajectory trajectory;
  double probability;
};

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

// Every length-`length` prefix with positive probability under pi_b,
// annotated with pi_e ratios. Throws InvalidArgument once more than `cap`
// prefixes would be produced.
std::vector<WeightedTrajectory> enumerate_trajectories(
    const TabularMdp& mdp, const StaticPolicy& pi_b, const StaticPolicy& pi_e,
    int length, std::size_t cap = kDefaultEnumerationCap);

// E[rho_{1:t} | S_t = s, A_t = a] under pi_b by prefix enumeration.
double conditional_ratio_bruteforce(const TabularMdp& mdp,
                                    const StaticPolicy& pi_e,
                                    const StaticPolicy& pi_b, int t, int s,
                                    int a,
                                    std::size_t cap = kDefaultEnumerationCap);

// ---------------------------------------------------------------------------
// Estimates from data.

inline constexpr double kDefaultModelSmoothing = 0.01;
inline constexpr double kDefaultRatioRidge = 1e-3;

struct EstimatedModel {
  TabularMdp mdp;
  // Rows with no observed transition; they self-loop in `mdp`.
  Mask fallback;
  // Discounted visit counts of (s, a) (discount gamma^{t-1}).
  Table visits;
};

// Maximum likelihood transitions with `smoothing` pseudo-counts per
// (s, a, s') on rows with data, empirical mean rewards and start frequencies.
// Rows without a transition self-loop; never-visited pairs get reward 0.
EstimatedModel estimate_model(const Dataset& data,
                              double smoothing = kDefaultModelSmoothing);

enum class RatioMethod { kModelBased, kMinmaxTabular };

struct RatioEstimateOptions {
  double smoothing = kDefaultModelSmoothing;
  double ridge = kDefaultRatioRidge;
};

// Estimated d^{pi_e} / d^{pi_b} averaged over the dataset's horizon.
//
// kModelBased: occupancy DP on estimate_model(data).
// kMinmaxTabular: ridge least squares on the sampled discounted balance
// equations for w, then negatives clipped and the result rescaled so that
// sum d_b_hat * w = 1.
RatioTable estimate_ratio(const Dataset& data, RatioMethod method,
                          const RatioEstimateOptions& options = {});

// Discounted empirical (s, a) frequency of the data, summing to 1.
Table empirical_occupancy(const Dataset& data);

// ---------------------------------------------------------------------------
// Text tables: a header line followed by rows "s,a,value" (or
// "t,s,a,value" for time-indexed series).

void write_table(std::ostream& out, const Table& table);
void write_table(std::ostream& out, const Mask& support, const Table& table);
void write_series(std::ostream& out, const std::vector<Table>& series,
                  const char* index_name = "t");

}  // namespace sope

#endif  // SOPE_OCCUPANCY_HPP_

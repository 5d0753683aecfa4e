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

#ifndef SOPE_HARNESS_HPP_
#define SOPE_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sope/estimators.hpp"
#include "sope/mdp.hpp"
#include "sope/occupancy.hpp"

namespace sope {

inline constexpr const char* kVersion = "0.1.0";

struct EnvironmentConfig {
  enum class Kind { kGraph, kToyMc };
  Kind kind = Kind::kGraph;
  int chain_len = 20;  // graph only
  double gamma = 0.98;
};

enum class RatioSource { kOracle, kModelBased, kMinmaxTabular };

struct QSource {
  enum class Kind { kExact, kPerturbed, kEstimated };
  Kind kind = Kind::kExact;
  // Weight of the uniform mixture in kPerturbed.
  double epsilon = 0.1;
};

const char* to_string(EnvironmentConfig::Kind kind);
const char* to_string(RatioSource source);
const char* to_string(QSource::Kind kind);
const char* to_string(RatioMode mode);
const char* to_string(NextAction next);

struct ExperimentConfig {
  EnvironmentConfig environment;
  double pi_e_p = 0.9;
  double pi_b_p = 0.5;
  // Empty means 0..L.
  std::vector<int> n_values;
  std::vector<int> batch_sizes = {128, 256, 512};
  int trials = 32;
  std::int64_t base_seed = 0;
  std::vector<Family> families = {Family::kSOPE};
  RatioSource ratio_method = RatioSource::kModelBased;
  RatioMode ratio_mode = RatioMode::kAverage;
  QSource dr_q_source;
  NextAction dr_next_action = NextAction::kExpectation;
  int bootstrap_resamples = 1000;
  // Worker threads for trials; 0 picks SOPE_THREADS or the hardware count.
  int threads = 0;
};

TabularMdp build_environment(const EnvironmentConfig& env);

// Throws InvalidArgument naming the offending field.
void validate(const ExperimentConfig& config);

// n_values, or 0..L when empty, sorted and deduplicated.
std::vector<int> resolved_n_values(const ExperimentConfig& config, int horizon);

// Transition rows mixed with the uniform distribution at weight epsilon.
// Absorbing states stay closed.
TabularMdp perturb_transitions(const TabularMdp& mdp, double epsilon);

// Dataset seeds derive from the key base_seed + kBatchSeedStride *
// batch_index + trial, hashed so that the per-trajectory seeds
// (dataset seed + i) of different cells do not collide.
inline constexpr std::int64_t kBatchSeedStride = 1'000'003;
std::int64_t dataset_seed(std::int64_t base_seed, int batch_index, int trial);

// Family rows of non-spectrum estimators carry n = kNoN.
inline constexpr int kNoN = -1;

struct SweepRow {
  Family family;
  int n;
  int batch_size;
  int trial;
  double estimate;
};

struct AggregateRow {
  Family family;
  int n;
  int batch_size;
  double bias;
  double variance;
  double mse;
  double mse_ci_lo;
  double mse_ci_hi;
};

struct SweepReport {
  ExperimentConfig config;
  double true_j = 0.0;
  std::vector<SweepRow> rows;
  std::vector<AggregateRow> aggregates;
  std::string rng_algorithm;
  std::string ratio_method;
  double wall_clock_seconds = 0.0;
};

SweepReport run_sweep(const ExperimentConfig& config);

// Groups rows by (family, n, batch_size) after a stable sort. Needs at least
// two trials per cell. The bootstrap CI resamples squared errors with
// `resamples` draws seeded from `seed` and the cell position.
std::vector<AggregateRow> aggregate(std::vector<SweepRow> rows, double true_j,
                                    int resamples = 1000,
                                    std::uint64_t seed = 0);

// Shortest round-trip decimal form.
std::string format_double(double value);

void write_raw_csv(std::ostream& out, const SweepReport& report);
void write_aggregate_csv(std::ostream& out, const SweepReport& report);
std::vector<SweepRow> read_raw_csv(std::istream& in);
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);

// Writes raw.csv and aggregate.csv into `dir`.
void write_csv(const SweepReport& report, const std::filesystem::path& dir);

// MSE / bias / variance against n, one panel row per spectrum family and one
// series per batch size.
void emit_svg(const SweepReport& report, const std::filesystem::path& path);
std::string render_svg(const SweepReport& report);

// Metadata record as a JSON document.
std::string metadata_json(const SweepReport& report);

}  // namespace sope

#endif  // SOPE_HARNESS_HPP_

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

#include "sope/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>
#include <utility>

#include <nlohmann/json.hpp>

#include "sope/error.hpp"
#include "sope/rng.hpp"

namespace sope {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

int worker_count(int requested, std::size_t units) {
  int threads = requested;
  if (threads <= 0) {
    if (const char* env = std::getenv("SOPE_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(threads, 1);
  return static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(units, 1)));
}

bool needs_ratio(Family f) {
  return f == Family::kSIS || f == Family::kWSIS || is_spectrum(f);
}

// Everything a trial needs that does not depend on the sampled data.
struct SweepContext {
  const ExperimentConfig& config;
  TabularMdp mdp;
  StaticPolicy pi_e;
  StaticPolicy pi_b;
  std::vector<int> n_values;
  bool any_ratio = false;
  bool any_dr = false;
  // Oracle ratios: index 0 is the d_{1:L} ratio, index n the d_{1:L-n} one.
  std::vector<RatioTable> oracle;
  std::optional<QTable> fixed_q;
};

RatioTable data_ratio(const ExperimentConfig& config, const Dataset& data) {
  const RatioMethod method = config.ratio_method == RatioSource::kMinmaxTabular
                                 ? RatioMethod::kMinmaxTabular
                                 : RatioMethod::kModelBased;
  return estimate_ratio(data, method);
}

HorizonMode q_mode(const TabularMdp& mdp) {
  return mdp.gamma() < 1.0 ? HorizonMode::kInfinite : HorizonMode::kFinite;
}

std::vector<SweepRow> run_unit(const SweepContext& ctx, int batch_index,
                               int trial) {
  const ExperimentConfig& config = ctx.config;
  const int m = config.batch_sizes[batch_index];
  const int L = ctx.mdp.horizon();
  const std::int64_t seed = dataset_seed(config.base_seed, batch_index, trial);
  const Dataset data = sample_dataset(ctx.mdp, ctx.pi_b, ctx.pi_e, m, seed);

  // ratios[k] serves n = k in truncated mode; ratios[0] is the full-horizon
  // ratio used by SIS, WSIS and every n in average mode.
  std::vector<RatioTable> ratios;
  if (ctx.any_ratio) {
    if (config.ratio_method == RatioSource::kOracle) {
      ratios = ctx.oracle;
    } else {
      ratios.push_back(data_ratio(config, data));
      if (config.ratio_mode == RatioMode::kTruncated) {
        for (int n = 1; n < L; ++n) {
          ratios.push_back(data_ratio(config, truncate_dataset(data, L - n)));
        }
      }
    }
  }
  std::optional<QTable> q = ctx.fixed_q;
  if (ctx.any_dr && !q) {
    const TabularMdp model = estimate_model(data).mdp;
    q = exact_q(model, ctx.pi_e, q_mode(model));
  }
  auto ratio_for = [&](int n) -> const RatioTable* {
    if (ratios.empty() || n >= L) return nullptr;
    if (config.ratio_mode == RatioMode::kTruncated) return &ratios[n];
    return &ratios[0];
  };

  std::vector<SweepRow> rows;
  for (Family family : config.families) {
    const std::vector<int> ns =
        is_spectrum(family) ? ctx.n_values : std::vector<int>{kNoN};
    for (int n : ns) {
      EstimatorSpec spec;
      spec.family = family;
      spec.n = n;
      spec.ratio = is_spectrum(family) ? ratio_for(n) : ratio_for(0);
      spec.ratio_mode = config.ratio_mode;
      spec.q = q ? &*q : nullptr;
      spec.next_action = config.dr_next_action;
      spec.seed = splitmix64(static_cast<std::uint64_t>(seed) ^ 0xd5u);
      try {
        rows.push_back({family, n, m, trial, evaluate(data, spec).value});
      } catch (const std::exception& e) {
        throw Error(std::string("family=") + to_string(family) +
                    " n=" + std::to_string(n) + " batch_size=" +
                    std::to_string(m) + " trial=" + std::to_string(trial) +
                    ": " + e.what());
      }
    }
  }
  return rows;
}

auto row_key(const SweepRow& r) {
  return std::make_tuple(static_cast<int>(r.family), r.n, r.batch_size, r.trial);
}

double quantile(std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("csv: malformed number '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s) {
  if (s.empty()) return kNoN;
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("csv: malformed integer '" + s + "'");
  }
  return v;
}

std::string format_n(int n) { return n == kNoN ? "" : std::to_string(n); }

constexpr const char* kRawHeader = "family,n,batch_size,trial,estimate";
constexpr const char* kAggregateHeader =
    "family,n,batch_size,bias,variance,mse,mse_ci_lo,mse_ci_hi";

}  // namespace

const char* to_string(EnvironmentConfig::Kind kind) {
  return kind == EnvironmentConfig::Kind::kGraph ? "graph" : "toy_mc";
}

const char* to_string(RatioSource source) {
  switch (source) {
    case RatioSource::kOracle: return "oracle";
    case RatioSource::kModelBased: return "model-based";
    case RatioSource::kMinmaxTabular: return "minmax-tabular";
  }
  return "unknown";
}

const char* to_string(QSource::Kind kind) {
  switch (kind) {
    case QSource::Kind::kExact: return "exact";
    case QSource::Kind::kPerturbed: return "perturbed";
    case QSource::Kind::kEstimated: return "estimated";
  }
  return "unknown";
}

const char* to_string(RatioMode mode) {
  return mode == RatioMode::kAverage ? "average" : "truncated";
}

const char* to_string(NextAction next) {
  return next == NextAction::kExpectation ? "expectation" : "sampled";
}

TabularMdp build_environment(const EnvironmentConfig& env) {
  if (env.kind == EnvironmentConfig::Kind::kGraph) {
    return build_graph_env(env.chain_len, env.gamma);
  }
  return build_toy_mc_env(env.gamma);
}

void validate(const ExperimentConfig& c) {
  require(c.environment.gamma > 0.0 && c.environment.gamma <= 1.0,
          "environment.gamma: must lie in (0, 1]");
  if (c.environment.kind == EnvironmentConfig::Kind::kGraph) {
    require(c.environment.chain_len >= 2,
            "environment.chain_len: must be at least 2");
  }
  require(c.pi_e_p >= 0.0 && c.pi_e_p <= 1.0, "pi_e_p: must lie in [0, 1]");
  require(c.pi_b_p >= 0.0 && c.pi_b_p <= 1.0, "pi_b_p: must lie in [0, 1]");
  require((c.pi_e_p == 0.0 || c.pi_b_p > 0.0) &&
              (c.pi_e_p == 1.0 || c.pi_b_p < 1.0),
          "pi_b_p: behavior policy must cover every action pi_e takes");
  const int L = c.environment.kind == EnvironmentConfig::Kind::kGraph
                    ? c.environment.chain_len
                    : kToyMcHorizon;
  for (int n : c.n_values) {
    require(n >= 0 && n <= L, "n_values: " + std::to_string(n) +
                                  " outside [0, " + std::to_string(L) + "]");
  }
  require(!c.batch_sizes.empty(), "batch_sizes: must not be empty");
  for (int b : c.batch_sizes) require(b >= 1, "batch_sizes: must be positive");
  require(c.trials >= 2, "trials: need at least 2 for variance estimates");
  require(!c.families.empty(), "families: must not be empty");
  require(c.bootstrap_resamples >= 1, "bootstrap_resamples: must be positive");
  require(c.threads >= 0, "threads: must be non-negative");
  require(c.dr_q_source.epsilon >= 0.0 && c.dr_q_source.epsilon <= 1.0,
          "dr_q_epsilon: must lie in [0, 1]");
}

std::vector<int> resolved_n_values(const ExperimentConfig& config, int horizon) {
  std::vector<int> ns = config.n_values;
  if (ns.empty()) {
    for (int n = 0; n <= horizon; ++n) ns.push_back(n);
  }
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  return ns;
}

TabularMdp perturb_transitions(const TabularMdp& mdp, double epsilon) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "perturb: epsilon outside [0, 1]");
  const int S = mdp.n_states();
  std::vector<double> p = mdp.transition_tensor();
  for (int s = 0; s < S; ++s) {
    if (mdp.is_absorbing(s)) continue;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const std::size_t base = (static_cast<std::size_t>(s) * mdp.n_actions() + a) * S;
      for (int s2 = 0; s2 < S; ++s2) {
        p[base + s2] = (1.0 - epsilon) * p[base + s2] + epsilon / S;
      }
    }
  }
  return TabularMdp(S, mdp.n_actions(), std::move(p), mdp.reward_table(),
                    mdp.initial_dist(), mdp.gamma(), mdp.horizon(),
                    mdp.absorbing());
}

std::int64_t dataset_seed(std::int64_t base_seed, int batch_index, int trial) {
  const std::uint64_t key = static_cast<std::uint64_t>(base_seed) +
                            static_cast<std::uint64_t>(kBatchSeedStride) *
                                static_cast<std::uint64_t>(batch_index) +
                            static_cast<std::uint64_t>(trial);
  // Keep clear of the top bit so that seed + i never overflows.
  return static_cast<std::int64_t>(splitmix64(key) >> 2);
}

SweepReport run_sweep(const ExperimentConfig& config) {
  validate(config);
  const auto started = std::chrono::steady_clock::now();

  TabularMdp mdp = build_environment(config.environment);
  StaticPolicy pi_e = make_static_policy(mdp, config.pi_e_p);
  StaticPolicy pi_b = make_static_policy(mdp, config.pi_b_p);
  SweepContext ctx{config, std::move(mdp), std::move(pi_e), std::move(pi_b), {}, false, false, {}, std::nullopt};
  const int L = ctx.mdp.horizon();
  ctx.n_values = resolved_n_values(config, L);
  for (Family f : config.families) {
    ctx.any_ratio = ctx.any_ratio || needs_ratio(f);
    ctx.any_dr = ctx.any_dr || f == Family::kDRSOPE;
  }
  if (ctx.any_ratio && config.ratio_method == RatioSource::kOracle) {
    ctx.oracle.push_back(oracle_ratio(ctx.mdp, ctx.pi_e, ctx.pi_b,
                                      RatioKind::kOracleAverage));
    if (config.ratio_mode == RatioMode::kTruncated) {
      for (int n = 1; n < L; ++n) {
        ctx.oracle.push_back(oracle_ratio(ctx.mdp, ctx.pi_e, ctx.pi_b,
                                          RatioKind::kOracleTruncated, L - n));
      }
    }
  }
  if (ctx.any_dr) {
    if (config.dr_q_source.kind == QSource::Kind::kExact) {
      ctx.fixed_q = exact_q(ctx.mdp, ctx.pi_e, q_mode(ctx.mdp));
    } else if (config.dr_q_source.kind == QSource::Kind::kPerturbed) {
      const TabularMdp noisy = perturb_transitions(ctx.mdp, config.dr_q_source.epsilon);
      ctx.fixed_q = exact_q(noisy, ctx.pi_e, q_mode(noisy));
    }
  }

  std::vector<std::pair<int, int>> units;
  for (int b = 0; b < static_cast<int>(config.batch_sizes.size()); ++b) {
    for (int k = 0; k < config.trials; ++k) units.emplace_back(b, k);
  }

  std::vector<std::vector<SweepRow>> results(units.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      try {
        results[i] = run_unit(ctx, units[i].first, units[i].second);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = units.size();
      }
    }
  };
  const int threads = worker_count(config.threads, units.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepReport report;
  report.config = config;
  report.true_j = exact_j(ctx.mdp, ctx.pi_e);
  for (auto& part : results) {
    report.rows.insert(report.rows.end(), part.begin(), part.end());
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return row_key(a) < row_key(b);
                   });
  report.aggregates = aggregate(report.rows, report.true_j,
                                config.bootstrap_resamples,
                                static_cast<std::uint64_t>(config.base_seed));
  report.rng_algorithm = std::string(kRngAlgorithm);
  report.ratio_method = to_string(config.ratio_method);
  if (config.ratio_method == RatioSource::kMinmaxTabular) {
    report.ratio_method +=
        " (ridge least squares on sampled discounted balance equations, "
        "clip then normalize)";
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

std::vector<AggregateRow> aggregate(std::vector<SweepRow> rows, double true_j,
                                    int resamples, std::uint64_t seed) {
  require(resamples >= 1, "aggregate: resamples must be positive");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return row_key(a) < row_key(b);
                   });
  std::vector<AggregateRow> out;
  std::size_t cell = 0;
  for (std::size_t begin = 0; begin < rows.size(); ++cell) {
    std::size_t end = begin;
    while (end < rows.size() && rows[end].family == rows[begin].family &&
           rows[end].n == rows[begin].n &&
           rows[end].batch_size == rows[begin].batch_size) {
      ++end;
    }
    const std::size_t count = end - begin;
    const SweepRow& head = rows[begin];
    if (count < 2) {
      throw InvalidArgument(std::string("aggregate: cell family=") +
                            to_string(head.family) + " n=" +
                            std::to_string(head.n) + " batch_size=" +
                            std::to_string(head.batch_size) +
                            " has fewer than 2 trials");
    }
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += rows[i].estimate;
    mean /= static_cast<double>(count);
    double ss = 0.0;
    std::vector<double> sq_err;
    sq_err.reserve(count);
    double mse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      ss += (rows[i].estimate - mean) * (rows[i].estimate - mean);
      const double e = rows[i].estimate - true_j;
      sq_err.push_back(e * e);
      mse += e * e;
    }
    mse /= static_cast<double>(count);

    Rng rng(splitmix64(seed) ^ splitmix64(cell + 1));
    std::vector<double> boot(resamples);
    for (int r = 0; r < resamples; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        sum += sq_err[static_cast<std::size_t>(rng.next() % count)];
      }
      boot[r] = sum / static_cast<double>(count);
    }
    std::sort(boot.begin(), boot.end());

    out.push_back({head.family, head.n, head.batch_size, mean - true_j,
                   ss / static_cast<double>(count - 1), mse,
                   quantile(boot, 0.025), quantile(boot, 0.975)});
    begin = end;
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_raw_csv(std::ostream& out, const SweepReport& report) {
  out << kRawHeader << '\n';
  for (const SweepRow& r : report.rows) {
    out << to_string(r.family) << ',' << format_n(r.n) << ',' << r.batch_size
        << ',' << r.trial << ',' << format_double(r.estimate) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const SweepReport& report) {
  out << kAggregateHeader << '\n';
  for (const AggregateRow& r : report.aggregates) {
    out << to_string(r.family) << ',' << format_n(r.n) << ',' << r.batch_size
        << ',' << format_double(r.bias) << ',' << format_double(r.variance)
        << ',' << format_double(r.mse) << ',' << format_double(r.mse_ci_lo)
        << ',' << format_double(r.mse_ci_hi) << '\n';
  }
}

std::vector<SweepRow> read_raw_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRawHeader) {
    throw Error("csv: expected header '" + std::string(kRawHeader) + "'");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw Error("csv: expected 5 fields in '" + line + "'");
    rows.push_back({parse_family(f[0]), parse_int(f[1]), parse_int(f[2]),
                    parse_int(f[3]), parse_double(f[4])});
  }
  return rows;
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kAggregateHeader) {
    throw Error("csv: expected header '" + std::string(kAggregateHeader) + "'");
  }
  std::vector<AggregateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw Error("csv: expected 8 fields in '" + line + "'");
    rows.push_back({parse_family(f[0]), parse_int(f[1]), parse_int(f[2]),
                    parse_double(f[3]), parse_double(f[4]), parse_double(f[5]),
                    parse_double(f[6]), parse_double(f[7])});
  }
  return rows;
}

void write_csv(const SweepReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
  };
  {
    auto out = open(dir / "raw.csv");
    write_raw_csv(out, report);
    if (!out) throw Error("write failed: " + (dir / "raw.csv").string());
  }
  auto out = open(dir / "aggregate.csv");
  write_aggregate_csv(out, report);
  if (!out) throw Error("write failed: " + (dir / "aggregate.csv").string());
}

std::string render_svg(const SweepReport& report) {
  constexpr double kPanelW = 320.0;
  constexpr double kPanelH = 220.0;
  constexpr double kMargin = 48.0;
  constexpr double kTop = 40.0;
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                        "#ff7f0e", "#9467bd", "#8c564b"};
  static const char* const kMetrics[] = {"mse", "bias", "variance"};

  std::vector<Family> families;
  std::vector<int> batches;
  for (const AggregateRow& r : report.aggregates) {
    if (!is_spectrum(r.family)) continue;
    if (std::find(families.begin(), families.end(), r.family) == families.end()) {
      families.push_back(r.family);
    }
    if (std::find(batches.begin(), batches.end(), r.batch_size) == batches.end()) {
      batches.push_back(r.batch_size);
    }
  }
  std::sort(batches.begin(), batches.end());

  const double width = 3 * kPanelW;
  const double height = kTop + std::max<std::size_t>(families.size(), 1) * kPanelH;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"8\" y=\"16\">true J = "
      << format_double(report.true_j) << "</text>\n";
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const double x = 160.0 + 110.0 * static_cast<double>(b);
    svg << "<line x1=\"" << x << "\" y1=\"12\" x2=\"" << x + 20
        << "\" y2=\"12\" stroke=\"" << kColors[b % 6]
        << "\" stroke-width=\"2\"/>\n<text x=\"" << x + 24
        << "\" y=\"16\">m = " << batches[b] << "</text>\n";
  }
  if (families.empty()) {
    svg << "<text x=\"8\" y=\"" << kTop + 20
        << "\">no spectrum families in this report</text>\n</svg>\n";
    return svg.str();
  }

  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    std::vector<AggregateRow> cells;
    for (const AggregateRow& r : report.aggregates) {
      if (r.family == families[fi]) cells.push_back(r);
    }
    std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
      return std::tie(a.batch_size, a.n) < std::tie(b.batch_size, b.n);
    });
    double n_lo = cells.front().n;
    double n_hi = cells.front().n;
    for (const auto& c : cells) {
      n_lo = std::min<double>(n_lo, c.n);
      n_hi = std::max<double>(n_hi, c.n);
    }
    if (n_hi == n_lo) n_hi = n_lo + 1.0;

    for (int mi = 0; mi < 3; ++mi) {
      auto metric = [mi](const AggregateRow& r) {
        return mi == 0 ? r.mse : mi == 1 ? r.bias : r.variance;
      };
      double y_lo = metric(cells.front());
      double y_hi = y_lo;
      for (const auto& c : cells) {
        y_lo = std::min(y_lo, metric(c));
        y_hi = std::max(y_hi, metric(c));
        if (mi == 0) {
          y_lo = std::min(y_lo, c.mse_ci_lo);
          y_hi = std::max(y_hi, c.mse_ci_hi);
        }
      }
      if (!(y_hi > y_lo)) {
        y_lo -= 0.5;
        y_hi += 0.5;
      }
      const double x0 = mi * kPanelW + kMargin;
      const double y0 = kTop + fi * kPanelH + 20.0;
      const double pw = kPanelW - kMargin - 12.0;
      const double ph = kPanelH - 56.0;
      auto px = [&](double n) { return x0 + (n - n_lo) / (n_hi - n_lo) * pw; };
      auto py = [&](double v) { return y0 + ph - (v - y_lo) / (y_hi - y_lo) * ph; };

      svg << "<g>\n<text x=\"" << x0 << "\" y=\"" << y0 - 6 << "\">"
          << to_string(families[fi]) << ": " << kMetrics[mi] << "</text>\n"
          << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << pw
          << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#888\"/>\n"
          << "<text x=\"" << x0 << "\" y=\"" << y0 + ph + 14 << "\">"
          << format_double(n_lo) << "</text>\n<text x=\"" << x0 + pw - 12
          << "\" y=\"" << y0 + ph + 14 << "\">" << format_double(n_hi)
          << "</text>\n<text x=\"" << x0 + pw / 2 - 4 << "\" y=\""
          << y0 + ph + 14 << "\">n</text>\n";
      char label[32];
      std::snprintf(label, sizeof(label), "%.3g", y_hi);
      svg << "<text x=\"" << x0 - 44 << "\" y=\"" << y0 + 10 << "\">" << label
          << "</text>\n";
      std::snprintf(label, sizeof(label), "%.3g", y_lo);
      svg << "<text x=\"" << x0 - 44 << "\" y=\"" << y0 + ph << "\">" << label
          << "</text>\n";

      for (std::size_t b = 0; b < batches.size(); ++b) {
        std::vector<const AggregateRow*> series;
        for (const auto& c : cells) {
          if (c.batch_size == batches[b]) series.push_back(&c);
        }
        if (series.empty()) continue;
        const char* color = kColors[b % 6];
        if (mi == 0) {
          svg << "<polygon fill=\"" << color
              << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
          for (const auto* c : series) svg << px(c->n) << ',' << py(c->mse_ci_hi) << ' ';
          for (auto it = series.rbegin(); it != series.rend(); ++it) {
            svg << px((*it)->n) << ',' << py((*it)->mse_ci_lo) << ' ';
          }
          svg << "\"/>\n";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (const auto* c : series) svg << px(c->n) << ',' << py(metric(*c)) << ' ';
        svg << "\"/>\n";
      }
      svg << "</g>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_svg(const SweepReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << render_svg(report);
  if (!out) throw Error("write failed: " + path.string());
}

std::string metadata_json(const SweepReport& report) {
  const ExperimentConfig& c = report.config;
  nlohmann::ordered_json config;
  config["environment"] = {{"kind", to_string(c.environment.kind)},
                           {"chain_len", c.environment.chain_len},
                           {"gamma", c.environment.gamma}};
  config["pi_e_p"] = c.pi_e_p;
  config["pi_b_p"] = c.pi_b_p;
  config["n_values"] = c.n_values;
  config["batch_sizes"] = c.batch_sizes;
  config["trials"] = c.trials;
  config["base_seed"] = c.base_seed;
  std::vector<std::string> families;
  for (Family f : c.families) families.emplace_back(to_string(f));
  config["families"] = families;
  config["ratio_method"] = to_string(c.ratio_method);
  config["ratio_mode"] = to_string(c.ratio_mode);
  config["dr_q_source"] = to_string(c.dr_q_source.kind);
  config["dr_q_epsilon"] = c.dr_q_source.epsilon;
  config["dr_next_action"] = to_string(c.dr_next_action);
  config["bootstrap_resamples"] = c.bootstrap_resamples;

  nlohmann::ordered_json meta;
  meta["version"] = kVersion;
  meta["config"] = config;
  meta["rng_algorithm"] = report.rng_algorithm;
  meta["seed_derivation"] =
      "splitmix64(base_seed + " + std::to_string(kBatchSeedStride) +
      " * batch_index + trial) >> 2; trajectory i uses dataset seed + i";
  meta["ratio_method"] = report.ratio_method;
  meta["dr_q_horizon"] = "stationary (infinite-horizon solve when gamma < 1)";
  meta["true_j"] = report.true_j;
  meta["wall_clock_seconds"] = report.wall_clock_seconds;
  return meta.dump(2) + "\n";
}

}  // namespace sope

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

#include "sope/cli.hpp"

#include <exception>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sope/checks.hpp"
#include "sope/config.hpp"
#include "sope/occupancy.hpp"

namespace sope {
namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

template <typename F>
void write_with(const std::filesystem::path& path, F&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  body(out);
  if (!out) throw Error("write failed: " + path.string());
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

int sweep_with(const ExperimentConfig& config, const CliInvocation& inv,
               std::ostream& out, std::ostream& err) {
  make_dir(inv.output_dir);
  const SweepReport report = run_sweep(config);
  write_csv(report, inv.output_dir);
  emit_svg(report, inv.output_dir / "sweep.svg");
  write_file(inv.output_dir / "config.yaml", format_config(config));
  write_file(inv.output_dir / "metadata.json", metadata_json(report));
  if (!inv.quiet) {
    err << "sope: " << report.rows.size() << " estimates, "
        << report.aggregates.size() << " cells, true J = "
        << format_double(report.true_j) << ", wrote " << inv.output_dir.string()
        << "\n";
  }
  out << inv.output_dir.string() << "\n";
  return 0;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "sope: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

ExperimentConfig demo_config() {
  ExperimentConfig c;
  c.environment.kind = EnvironmentConfig::Kind::kGraph;
  c.environment.chain_len = 6;
  c.environment.gamma = 0.98;
  c.pi_e_p = 0.9;
  c.pi_b_p = 0.5;
  c.batch_sizes = {32, 128};
  c.trials = 8;
  c.families = {Family::kSOPE, Family::kWSOPE, Family::kDRSOPE};
  c.ratio_method = RatioSource::kModelBased;
  c.dr_q_source.kind = QSource::Kind::kPerturbed;
  return c;
}

ExperimentConfig resolve_config(const CliInvocation& inv,
                                const ExperimentConfig& defaults) {
  std::vector<std::string> overrides = inv.overrides;
  if (inv.seed) overrides.push_back("base_seed=" + std::to_string(*inv.seed));
  if (inv.config_path) return parse_config(*inv.config_path, overrides);
  return parse_config_string(format_config(defaults), overrides);
}

int cmd_sweep(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!inv.config_path) throw Error("sweep needs --config");
    return sweep_with(resolve_config(inv), inv, out, err);
  });
}

int cmd_demo(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    return sweep_with(resolve_config(inv, demo_config()), inv, out, err);
  });
}

int cmd_oracle(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(inv);
    const TabularMdp mdp = build_environment(config.environment);
    const StaticPolicy pi_e = make_static_policy(mdp, config.pi_e_p);
    const StaticPolicy pi_b = make_static_policy(mdp, config.pi_b_p);
    make_dir(inv.output_dir);

    for (const auto& [name, policy] :
         {std::pair{"pi_e", &pi_e}, std::pair{"pi_b", &pi_b}}) {
      const OccupancyTables occ = occupancy_tables(mdp, *policy);
      const std::string stem = std::string("occupancy_") + name;
      write_with(inv.output_dir / (stem + "_t.txt"),
                 [&](std::ostream& o) { write_series(o, occ.d_t); });
      write_with(inv.output_dir / (stem + "_avg.txt"),
                 [&](std::ostream& o) { write_table(o, occ.d_avg); });
      write_with(inv.output_dir / (stem + "_trunc.txt"),
                 [&](std::ostream& o) { write_series(o, occ.d_trunc, "T"); });
      out << "J(" << name << ") = " << format_double(occ.j_value) << "\n";
    }
    const RatioTable w = oracle_ratio(mdp, pi_e, pi_b, RatioKind::kOracleAverage);
    write_with(inv.output_dir / "ratio_avg.txt",
               [&](std::ostream& o) { write_table(o, w.support, w.w); });
    const QTable q = exact_q(
        mdp, pi_e, mdp.gamma() < 1.0 ? HorizonMode::kInfinite : HorizonMode::kFinite);
    write_with(inv.output_dir / "q_pi_e.txt",
               [&](std::ostream& o) { write_table(o, q.q); });
    write_file(inv.output_dir / "config.yaml", format_config(config));
    if (!inv.quiet) err << "sope: oracle tables in " << inv.output_dir.string() << "\n";
    return 0;
  });
}

int cmd_check(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    int failures = 0;
    for (const CheckResult& r : run_builtin_checks()) {
      out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
      if (!r.passed) ++failures;
    }
    if (failures > 0 && !inv.quiet) err << "sope: " << failures << " check(s) failed\n";
    return failures == 0 ? 0 : 1;
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Spectrum of off-policy estimators: sweeps, oracles and checks"};
  app.require_subcommand(1);
  CliInvocation inv;
  std::string config;
  std::string out_dir;
  std::int64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config, "configuration file (YAML)");
    if (needs_config) opt->required();
    opt->check(CLI::ExistingFile);
    sub->add_option("--set", inv.overrides, "override key=value (repeatable)")
        ->allow_extra_args(false);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override base_seed");
    sub->add_flag("--quiet", inv.quiet, "suppress progress messages");
  };
  auto* sweep = app.add_subcommand("sweep", "run an estimator sweep");
  add_common(sweep, true);
  auto* oracle = app.add_subcommand("oracle", "dump exact occupancies, ratios and q");
  add_common(oracle, false);
  auto* check = app.add_subcommand("check", "run the built-in identity checks");
  check->add_flag("--quiet", inv.quiet, "suppress progress messages");
  auto* demo = app.add_subcommand("demo", "small preset sweep");
  add_common(demo, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (!config.empty()) inv.config_path = config;
  if (!out_dir.empty()) inv.output_dir = out_dir;
  for (auto* sub : {sweep, oracle, demo}) {
    if (sub->parsed() && sub->count("--seed") > 0) inv.seed = seed;
  }
  if (sweep->parsed()) return cmd_sweep(inv, std::cout, std::cerr);
  if (oracle->parsed()) return cmd_oracle(inv, std::cout, std::cerr);
  if (check->parsed()) return cmd_check(inv, std::cout, std::cerr);
  return cmd_demo(inv, std::cout, std::cerr);
}

}  // namespace sope

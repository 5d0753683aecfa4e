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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sope/cli.hpp"
#include "sope/config.hpp"

using namespace sope;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = SOPE_CONFIG_DIR;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("demo writes the full pipeline and is reproducible") {
  TempDir a("sope_cli_demo_a");
  TempDir b("sope_cli_demo_b");
  std::ostringstream out;
  std::ostringstream err;
  CliInvocation inv;
  inv.subcommand = "demo";
  inv.output_dir = a.path;
  CHECK(cmd_demo(inv, out, err) == 0);
  inv.output_dir = b.path;
  inv.quiet = true;
  CHECK(cmd_demo(inv, out, err) == 0);
  for (const char* file : {"raw.csv", "aggregate.csv", "sweep.svg", "config.yaml", "metadata.json"}) {
    CHECK(fs::exists(a.path / file));
  }
  CHECK(slurp(a.path / "raw.csv") == slurp(b.path / "raw.csv"));
  CHECK(slurp(a.path / "aggregate.csv") == slurp(b.path / "aggregate.csv"));
  CHECK(slurp(a.path / "sweep.svg") == slurp(b.path / "sweep.svg"));
  CHECK(err.str().find("true J") != std::string::npos);

  const std::string meta = slurp(a.path / "metadata.json");
  CHECK(meta.find("mt19937_64/splitmix64-seed") != std::string::npos);
  CHECK(meta.find("\"version\"") != std::string::npos);
  // The config echo reproduces the run.
  const ExperimentConfig echoed = parse_config(a.path / "config.yaml");
  CHECK(format_config(echoed) == format_config(demo_config()));
}

TEST_CASE("demo preset matches the shipped demo config") {
  CHECK(format_config(parse_config(kConfigs / "demo.cfg")) == format_config(demo_config()));
}

TEST_CASE("sweep with config, overrides and seed") {
  TempDir dir("sope_cli_sweep");
  std::ostringstream out;
  std::ostringstream err;
  CliInvocation inv;
  inv.subcommand = "sweep";
  inv.config_path = kConfigs / "demo.cfg";
  inv.overrides = {"trials=2", "batch_sizes=[4]", "families=[PDIS]"};
  inv.seed = 99;
  inv.output_dir = dir.path;
  inv.quiet = true;
  CHECK(cmd_sweep(inv, out, err) == 0);
  CHECK(err.str().empty());
  CHECK(out.str().find(dir.path.string()) != std::string::npos);
  const std::string raw = slurp(dir.path / "raw.csv");
  CHECK(raw == "family,n,batch_size,trial,estimate\n" + raw.substr(35));
  CHECK(std::count(raw.begin(), raw.end(), '\n') == 3);
  CHECK(parse_config(dir.path / "config.yaml").base_seed == 99);
}

TEST_CASE("sweep failures exit nonzero with a diagnostic") {
  TempDir dir("sope_cli_fail");
  std::ostringstream out;
  std::ostringstream err;
  CliInvocation inv;
  inv.subcommand = "sweep";
  inv.output_dir = dir.path;
  CHECK(cmd_sweep(inv, out, err) == 1);
  CHECK(err.str().find("--config") != std::string::npos);

  err.str("");
  inv.config_path = kConfigs / "demo.cfg";
  inv.overrides = {"gama=0.9"};
  CHECK(cmd_sweep(inv, out, err) == 1);
  CHECK(err.str().find("gama") != std::string::npos);

  // An estimator hard error: pi_e never takes the action sampled at t=1.
  err.str("");
  inv.overrides = {"pi_e_p=1.0", "families=[CWPDIS]", "batch_sizes=[1]", "trials=2"};
  bool failed = false;
  for (int seed = 0; seed < 40 && !failed; ++seed) {
    inv.seed = seed;
    failed = cmd_sweep(inv, out, err) != 0;
  }
  CHECK(failed);
  CHECK(err.str().find("family=CWPDIS") != std::string::npos);
}

TEST_CASE("oracle dumps tables and values") {
  TempDir dir("sope_cli_oracle");
  std::ostringstream out;
  std::ostringstream err;
  CliInvocation inv;
  inv.subcommand = "oracle";
  inv.overrides = {"environment.chain_len=4"};
  inv.output_dir = dir.path;
  CHECK(cmd_oracle(inv, out, err) == 0);
  CHECK(out.str().find("J(pi_e) = ") != std::string::npos);
  CHECK(out.str().find("J(pi_b) = ") != std::string::npos);
  for (const char* file : {"occupancy_pi_e_t.txt", "occupancy_pi_e_avg.txt", "occupancy_pi_e_trunc.txt",
                           "occupancy_pi_b_t.txt", "ratio_avg.txt", "q_pi_e.txt", "config.yaml"}) {
    CHECK(fs::exists(dir.path / file));
  }
  CHECK(slurp(dir.path / "ratio_avg.txt").rfind("s,a,value\n", 0) == 0);
  CHECK(slurp(dir.path / "ratio_avg.txt").find("masked") != std::string::npos);
  CHECK(slurp(dir.path / "occupancy_pi_e_t.txt").rfind("t,s,a,value\n", 0) == 0);
  CHECK(slurp(dir.path / "occupancy_pi_e_trunc.txt").rfind("T,s,a,value\n", 0) == 0);
}

TEST_CASE("check passes every built-in identity") {
  std::ostringstream out;
  std::ostringstream err;
  CliInvocation inv;
  inv.subcommand = "check";
  CHECK(cmd_check(inv, out, err) == 0);
  const std::string text = out.str();
  CHECK(text.find("FAIL") == std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') >= 6);
}

TEST_CASE("argument parsing") {
  TempDir dir("sope_cli_args");
  CHECK(run({"sope", "check", "--quiet"}) == 0);
  CHECK(run({"sope", "demo", "--out", dir.path.string(), "--set", "trials=2", "--set",
             "batch_sizes=[4]", "--seed", "5", "--quiet"}) == 0);
  const ExperimentConfig c = parse_config(dir.path / "config.yaml");
  CHECK(c.trials == 2);
  CHECK(c.batch_sizes == std::vector<int>{4});
  CHECK(c.base_seed == 5);
  CHECK(run({"sope", "sweep", "--config", (kConfigs / "demo.cfg").string(), "--out",
             dir.path.string(), "--set", "trials=2", "--set", "batch_sizes=[4]", "--quiet"}) == 0);
  CHECK(run({"sope", "sweep"}) != 0);
  CHECK(run({"sope", "sweep", "--config", "/nonexistent.cfg"}) != 0);
  CHECK(run({"sope", "frobnicate"}) != 0);
  CHECK(run({"sope"}) != 0);
}

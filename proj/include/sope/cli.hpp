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

#ifndef SOPE_CLI_HPP_
#define SOPE_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sope/harness.hpp"

namespace sope {

struct CliInvocation {
  std::string subcommand;
  std::optional<std::filesystem::path> config_path;
  std::vector<std::string> overrides;
  std::filesystem::path output_dir = "sope-out";
  std::optional<std::int64_t> seed;
  bool quiet = false;
};

// Graph(6), 8 trials, SOPE / WSOPE / DRSOPE over every n.
ExperimentConfig demo_config();

// Config file (or defaults), then --set overrides, then --seed.
ExperimentConfig resolve_config(const CliInvocation& invocation,
                                const ExperimentConfig& defaults = {});

// Each command returns the process exit status. Data goes to files in the
// output directory (and `out` where documented), diagnostics to `err`.
int cmd_sweep(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int cmd_oracle(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int cmd_check(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int cmd_demo(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

// Parses argv and dispatches.
int run_cli(int argc, char** argv);

}  // namespace sope

#endif  // SOPE_CLI_HPP_

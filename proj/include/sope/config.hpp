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

#ifndef SOPE_CONFIG_HPP_
#define SOPE_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "sope/error.hpp"
#include "sope/harness.hpp"

namespace sope {

// Parse or validation failure in a configuration document. line and column
// are 1-based; 0 when the problem has no source position (overrides).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0);
  // Message without the position suffix.
  const std::string& message() const { return message_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  std::string message_;
  int line_;
  int column_;
};

// Configuration documents are YAML mappings:
//
//   environment:
//     kind: graph          # graph | toy_mc
//     chain_len: 20        # graph only
//     gamma: 0.98
//   pi_e_p: 0.9
//   pi_b_p: 0.5
//   n_values: all         # or a list of integers
//   batch_sizes: [128, 256, 512]
//   trials: 32
//   base_seed: 0
//   families: [SOPE, WSOPE]
//   ratio_method: model-based   # oracle | model-based | minmax-tabular
//   ratio_mode: average         # average | truncated
//   dr_q_source: exact          # exact | perturbed | estimated
//   dr_q_epsilon: 0.1
//   dr_next_action: expectation # expectation | sampled
//   bootstrap_resamples: 1000
//   threads: 0
//
// Every key is optional and defaults to ExperimentConfig. Unknown keys are
// errors. Overrides are "dotted.key=value" strings whose value is read as a
// YAML scalar or flow sequence; they are applied after the file.
ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config_string(const std::string& text,
                                     const std::vector<std::string>& overrides = {});

// Canonical document for `config`; parse_config_string inverts it.
std::string format_config(const ExperimentConfig& config);

}  // namespace sope

#endif  // SOPE_CONFIG_HPP_

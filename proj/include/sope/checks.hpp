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

#ifndef SOPE_CHECKS_HPP_
#define SOPE_CHECKS_HPP_

#include <functional>
#include <string>
#include <vector>

#include "sope/mdp.hpp"

namespace sope {

struct CheckResult {
  std::string name;
  bool passed;
  // Worst observed deviation, or the failure message.
  std::string detail;
};

// Exact identities on small graph instances: conditional ratio identity,
// endpoint identities, finite-horizon unbiasedness with truncated ratios,
// stationary Bellman residuals and DR zero variance.
std::vector<CheckResult> run_builtin_checks();

// sum over every length-L trajectory tau of p_{pi_b}(tau) * f(tau), where f
// sees a one-trajectory dataset.
double bruteforce_expectation(const TabularMdp& mdp, const StaticPolicy& pi_b,
                              const StaticPolicy& pi_e,
                              const std::function<double(const Dataset&)>& f);

}  // namespace sope

#endif  // SOPE_CHECKS_HPP_

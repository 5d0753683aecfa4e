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

#ifndef SOPE_ERROR_HPP_
#define SOPE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sope {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad size, out of range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The evaluation policy puts mass where the behavior policy has none.
class SupportError : public Error {
 public:
  using Error::Error;
};

// An estimator touched a (s, a) entry whose ratio is masked.
class MaskedRatioError : public Error {
 public:
  MaskedRatioError(int state, int action)
      : Error("ratio entry (s=" + std::to_string(state) +
              ", a=" + std::to_string(action) +
              ") is outside the behavior support"),
        state_(state),
        action_(action) {}
  int state() const { return state_; }
  int action() const { return action_; }

 private:
  int state_;
  int action_;
};

// Self-normalized estimators hit an all-zero weight column.
class ZeroDenominatorError : public Error {
 public:
  explicit ZeroDenominatorError(int t)
      : Error("sum of importance weights is zero at t=" + std::to_string(t)),
        t_(t) {}
  int time_step() const { return t_; }

 private:
  int t_;
};

}  // namespace sope

#endif  // SOPE_ERROR_HPP_

// Copyright (c) 2026 The asr_grpo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ASR_GRPO_ERROR_HPP_
#define ASR_GRPO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace asr_grpo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters, bounds or settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition (wrong vocabulary, negative input).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A metric or statistic has no value for the given input (empty reference,
// too few points).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus, channel, checkpoint or config file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training or experiment stage failed at runtime (non-finite values, I/O).
class RunFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace asr_grpo

#endif  // ASR_GRPO_ERROR_HPP_

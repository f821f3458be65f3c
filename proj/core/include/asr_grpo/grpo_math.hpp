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

#ifndef ASR_GRPO_GRPO_MATH_HPP_
#define ASR_GRPO_GRPO_MATH_HPP_

#include <span>
#include <vector>

namespace asr_grpo {

// Group-relative advantages (R_i - mean R) / std R with the population
// standard deviation. A group whose std is at most `std_epsilon` gets all
// zeros. Throws ConfigError for fewer than two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double std_epsilon);

// Per-token KL estimate r - log r - 1 with r = pi_ref / pi_theta, evaluated
// from log-probabilities as expm1(d) - d, d = logp_ref - logp_current.
double kl_per_token(double logp_ref, double logp_current);

}  // namespace asr_grpo

#endif  // ASR_GRPO_GRPO_MATH_HPP_

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

#include "asr_grpo/grpo_math.hpp"

#include <algorithm>
#include <cmath>

#include "asr_grpo/error.hpp"

namespace asr_grpo {

std::vector<double> compute_advantages(std::span<const double> rewards, double std_epsilon) {
  if (rewards.size() < 2) {
    throw ConfigError("group-relative advantages need at least two rewards");
  }
  if (!(std_epsilon > 0.0)) throw ConfigError("std_epsilon must be positive");
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (!(sd > std_epsilon)) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double kl_per_token(double logp_ref, double logp_current) {
  const double d = logp_ref - logp_current;
  // expm1(d) >= d mathematically; clamp the last-ulp case.
  return std::max(0.0, std::expm1(d) - d);
}

}  // namespace asr_grpo

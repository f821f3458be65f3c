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

#include "asr_grpo/reward.hpp"

#include <cmath>

#include "asr_grpo/editdist.hpp"
#include "asr_grpo/error.hpp"

namespace asr_grpo {

std::string to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::kCerOnly: return "cer_only";
    case RewardMode::kNllOnly: return "nll_only";
    case RewardMode::kCombined: return "combined";
  }
  return "?";
}

std::string to_string(NllNormalization norm) {
  return norm == NllNormalization::kTotal ? "total" : "per_token";
}

RewardMode parse_reward_mode(std::string_view text) {
  if (text == "cer_only") return RewardMode::kCerOnly;
  if (text == "nll_only") return RewardMode::kNllOnly;
  if (text == "combined") return RewardMode::kCombined;
  throw ConfigError("unknown reward mode '" + std::string(text) + "'");
}

NllNormalization parse_nll_normalization(std::string_view text) {
  if (text == "total") return NllNormalization::kTotal;
  if (text == "per_token") return NllNormalization::kPerToken;
  throw ConfigError("unknown NLL normalization '" + std::string(text) + "'");
}

void RewardConfig::validate() const {
  if (!(alpha_c > 0.0) || !(alpha_n > 0.0)) {
    throw ConfigError("reward sensitivities alpha_c and alpha_n must be positive");
  }
  if (!(lambda_c >= 0.0) || !(lambda_n >= 0.0)) {
    throw ConfigError("reward weights must be nonnegative");
  }
  if (!(lambda_c + lambda_n > 0.0)) throw ConfigError("reward weights sum to zero");
}

double reward_cer(double cer, double alpha_c) {
  if (!(cer >= 0.0)) throw UsageError("reward_cer: CER must be nonnegative");
  if (!(alpha_c > 0.0)) throw UsageError("reward_cer: alpha_c must be positive");
  const double e = std::exp(-2.0 * alpha_c * cer);
  return 2.0 * e / (1.0 + e);
}

double reward_nll(double nll_used, double alpha_n) {
  if (!(nll_used >= 0.0)) throw UsageError("reward_nll: NLL must be nonnegative");
  if (!(alpha_n > 0.0)) throw UsageError("reward_nll: alpha_n must be positive");
  return std::exp(-nll_used / alpha_n);
}

double combine(double r_cer, double r_nll, double lambda_c, double lambda_n) {
  if (!(lambda_c >= 0.0) || !(lambda_n >= 0.0) || !(lambda_c + lambda_n > 0.0)) {
    throw ConfigError("combine: weights must be nonnegative and not both zero");
  }
  if (!(r_cer >= 0.0 && r_cer <= 1.0) || !(r_nll >= 0.0 && r_nll <= 1.0)) {
    throw UsageError("combine: component rewards must lie in [0, 1]");
  }
  if (lambda_n == 0.0) return r_cer;
  if (lambda_c == 0.0) return r_nll;
  if (r_cer == 0.0 || r_nll == 0.0) return 0.0;
  return (lambda_c + lambda_n) / (lambda_c / r_cer + lambda_n / r_nll);
}

RewardBreakdown score_rollout(const RewardConfig& config, const AsrChannelModel& model,
                              const TokenSequence& truth, const TokenSequence& speech) {
  config.validate();
  AsrScore asr = teacher_forced_nll(model, speech, truth);
  RewardBreakdown b;
  b.cer = utterance_cer(truth, asr.transcript);
  b.nll_total = asr.nll_total;
  b.nll_used = config.nll_normalization == NllNormalization::kTotal ? asr.nll_total
                                                                      : asr.nll_per_token;
  b.r_cer = reward_cer(b.cer, config.alpha_c);
  b.r_nll = reward_nll(b.nll_used, config.alpha_n);
  switch (config.mode) {
    case RewardMode::kCerOnly: b.r_combined = b.r_cer; break;
    case RewardMode::kNllOnly: b.r_combined = b.r_nll; break;
    case RewardMode::kCombined:
      b.r_combined = combine(b.r_cer, b.r_nll, config.lambda_c, config.lambda_n);
      break;
  }
  b.transcript = std::move(asr.transcript);
  return b;
}

}  // namespace asr_grpo

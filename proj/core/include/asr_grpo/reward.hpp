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

#ifndef ASR_GRPO_REWARD_HPP_
#define ASR_GRPO_REWARD_HPP_

#include <string>
#include <string_view>

#include "asr_grpo/asr_sim.hpp"
#include "asr_grpo/seqcore.hpp"

namespace asr_grpo {

// Which reward drives training: the CER term alone, the NLL term alone, or
// their weighted harmonic mean.
enum class RewardMode { kCerOnly, kNllOnly, kCombined };

// Whether the NLL fed to the NLL reward is the utterance total or the
// per-token mean.
enum class NllNormalization { kTotal, kPerToken };

std::string to_string(RewardMode mode);
std::string to_string(NllNormalization norm);
RewardMode parse_reward_mode(std::string_view text);
NllNormalization parse_nll_normalization(std::string_view text);

struct RewardConfig {
  double alpha_c = 3.0;
  double alpha_n = 3.0;
  double lambda_c = 0.6;
  double lambda_n = 0.4;
  RewardMode mode = RewardMode::kCombined;
  NllNormalization nll_normalization = NllNormalization::kPerToken;

  // Throws ConfigError on nonpositive sensitivities, negative weights or
  // weights summing to zero.
  void validate() const;
};

struct RewardBreakdown {
  double cer = 0.0;
  double nll_used = 0.0;
  double r_cer = 0.0;
  double r_nll = 0.0;
  double r_combined = 0.0;
  // Not part of the reward itself, kept for logging.
  double nll_total = 0.0;
  TokenSequence transcript{nullptr};
};

// 1 - tanh(alpha_c * cer), evaluated as 2 / (1 + exp(2 alpha_c cer)) so large
// CERs keep full relative precision.
double reward_cer(double cer, double alpha_c);

// exp(-nll / alpha_n).
double reward_nll(double nll_used, double alpha_n);

// (lambda_c + lambda_n) / (lambda_c / r_cer + lambda_n / r_nll). A zero
// component with a positive weight yields 0; a zero weight drops its term.
double combine(double r_cer, double r_nll, double lambda_c, double lambda_n);

// Transcribes `speech`, measures CER and teacher-forced NLL against `truth`,
// and maps them through the reward. In kCerOnly / kNllOnly mode r_combined
// is r_cer / r_nll exactly.
RewardBreakdown score_rollout(const RewardConfig& config, const AsrChannelModel& model,
                              const TokenSequence& truth, const TokenSequence& speech);

}  // namespace asr_grpo

#endif  // ASR_GRPO_REWARD_HPP_

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

#ifndef ASR_GRPO_GRPO_HPP_
#define ASR_GRPO_GRPO_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "asr_grpo/asr_sim.hpp"
#include "asr_grpo/grpo_math.hpp"
#include "asr_grpo/optim.hpp"
#include "asr_grpo/policy.hpp"
#include "asr_grpo/reward.hpp"
#include "asr_grpo/seqcore.hpp"

namespace asr_grpo {

struct GrpoConfig {
  int group_size = 8;
  double beta = 0.1;
  double learning_rate = 1e-5;
  int updates = 0;
  int batch_prompts = 1;     // prompts (groups) per update
  int inner_epochs = 1;      // gradient steps per sampled batch, pi_old fixed
  double std_epsilon = 1e-8;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double clip_epsilon = 0.0; // 0: unclipped objective
  double temperature = 1.0;
  double kl_ceiling = 0.0;   // abort when mean KL exceeds it; 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct RolloutGroup {
  std::size_t prompt_id = 0;
  std::vector<Rollout> rollouts;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct UpdateMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double mean_cer = 0.0;
  double mean_nll = 0.0;   // per-token teacher-forced NLL
  double mean_kl = 0.0;    // per-token KL(pi_theta || pi_ref) before the step
  double objective = 0.0;  // value at the first inner epoch
  double grad_norm = 0.0;  // L2 norm at the first inner epoch
  double wall_ms = 0.0;
};

// pi_theta, the frozen pi_ref and the per-update pi_old snapshot, plus the
// optimizer state carried across updates.
struct TrainState {
  TrainState(const PolicyModel& initial, const GrpoConfig& config);

  PolicyModel current;
  PolicyModel reference;
  PolicyModel old;
  Optimizer optimizer;
  int step = 0;
};

// Samples `group_size` rollouts from state.old for one prompt, scores them and
// fills logp_ref under the reference policy and the group advantages. Rollout
// i draws from root.split(i).
RolloutGroup collect_group(const TrainState& state, std::size_t prompt_id,
                           const TokenSequence& prompt, const AsrChannelModel& channel,
                           const RewardConfig& reward_config, const GrpoConfig& config,
                           const SeededRng& root);

struct UpdateResult {
  UpdateMetrics metrics;
  std::vector<RolloutGroup> groups;
};

// One GRPO update: snapshot pi_old <- pi_theta, collect a group per prompt,
// then take `inner_epochs` ascent steps on the batch-mean objective. Group b
// samples from rng.split(step).split(b). Throws RunFailure when the objective
// or gradient is not finite, or mean KL passes config.kl_ceiling.
UpdateResult run_update(TrainState& state, std::span<const std::size_t> prompt_ids,
                        const PromptCorpus& corpus, const AsrChannelModel& channel,
                        const RewardConfig& reward_config, const GrpoConfig& config,
                        const SeededRng& rng);

struct TrainHooks {
  std::function<void(const UpdateResult&, const TrainState&)> on_update;
};

struct TrainResult {
  PolicyModel final_model;
  std::vector<UpdateMetrics> metrics;
  std::uint64_t reference_hash_start = 0;
  std::uint64_t reference_hash_end = 0;
};

// Runs config.updates updates over the train split, `batch_prompts` at a time
// in a fresh shuffle per pass.
TrainResult train(const PolicyModel& initial, const PromptCorpus& corpus,
                  const AsrChannelModel& channel, const RewardConfig& reward_config,
                  const GrpoConfig& config, const TrainHooks& hooks = {});

}  // namespace asr_grpo

#endif  // ASR_GRPO_GRPO_HPP_

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

#include "asr_grpo/grpo.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "asr_grpo/error.hpp"

namespace asr_grpo {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kUpdateStream = 0x555044ULL;

}  // namespace

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("GRPO group size must be >= 2");
  if (!(beta >= 0.0)) throw ConfigError("KL coefficient beta must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (updates < 0) throw ConfigError("update count must be >= 0");
  if (batch_prompts < 1) throw ConfigError("batch_prompts must be >= 1");
  if (inner_epochs < 1) throw ConfigError("inner_epochs must be >= 1");
  if (!(std_epsilon > 0.0)) throw ConfigError("std_epsilon must be positive");
  if (!(clip_epsilon >= 0.0)) throw ConfigError("clip_epsilon must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");
  if (!(kl_ceiling >= 0.0)) throw ConfigError("kl_ceiling must be >= 0");
}

TrainState::TrainState(const PolicyModel& initial, const GrpoConfig& config)
    : current(initial),
      reference(initial),
      old(initial),
      optimizer(config.optimizer, config.learning_rate, initial.params().size()) {}

RolloutGroup collect_group(const TrainState& state, std::size_t prompt_id,
                           const TokenSequence& prompt, const AsrChannelModel& channel,
                           const RewardConfig& reward_config, const GrpoConfig& config,
                           const SeededRng& root) {
  RolloutGroup g;
  g.prompt_id = prompt_id;
  const SampleOptions opts{config.temperature, false};
  for (int i = 0; i < config.group_size; ++i) {
    SeededRng rng = root.split(static_cast<std::uint64_t>(i));
    Rollout r = sample(state.old, prompt, opts, rng);
    r.logp_ref = log_prob(state.reference, prompt, r.output);
    g.breakdowns.push_back(score_rollout(reward_config, channel, prompt, r.speech()));
    g.rewards.push_back(g.breakdowns.back().r_combined);
    g.rollouts.push_back(std::move(r));
  }
  g.advantages = compute_advantages(g.rewards, config.std_epsilon);
  return g;
}

UpdateResult run_update(TrainState& state, std::span<const std::size_t> prompt_ids,
                        const PromptCorpus& corpus, const AsrChannelModel& channel,
                        const RewardConfig& reward_config, const GrpoConfig& config,
                        const SeededRng& rng) {
  config.validate();
  if (prompt_ids.empty()) throw ConfigError("run_update needs at least one prompt");
  const auto t0 = std::chrono::steady_clock::now();
  state.old = state.current;
  const SeededRng step_rng = rng.split(kUpdateStream).split(static_cast<std::uint64_t>(state.step));

  UpdateResult res;
  res.metrics.step = state.step + 1;
  double sum_reward = 0.0, sum_cer = 0.0, sum_nll = 0.0;
  std::size_t n_rollouts = 0;
  for (std::size_t b = 0; b < prompt_ids.size(); ++b) {
    const std::size_t id = prompt_ids[b];
    if (id >= corpus.size()) throw UsageError("run_update: prompt id out of range");
    res.groups.push_back(collect_group(state, id, corpus[id], channel, reward_config, config,
                                       step_rng.split(b)));
    for (const auto& br : res.groups.back().breakdowns) {
      sum_reward += br.r_combined;
      sum_cer += br.cer;
      sum_nll += br.nll_total / static_cast<double>(corpus[id].size());
      ++n_rollouts;
    }
  }
  const auto n = static_cast<double>(n_rollouts);
  res.metrics.mean_reward = sum_reward / n;
  res.metrics.mean_cer = sum_cer / n;
  res.metrics.mean_nll = sum_nll / n;

  const ObjectiveOptions obj_opts{config.beta, config.clip_epsilon};
  const double inv_batch = 1.0 / static_cast<double>(res.groups.size());
  std::vector<double> grad(state.current.params().size());
  for (int epoch = 0; epoch < config.inner_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    double kl = 0.0;
    for (const auto& g : res.groups) {
      const ObjectiveResult o = objective_gradient(state.current, g.rollouts, g.advantages,
                                                   obj_opts);
      value += inv_batch * o.value;
      kl += inv_batch * o.mean_kl;
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += inv_batch * o.gradient[j];
    }
    double norm2 = 0.0;
    for (double v : grad) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(value) || !std::isfinite(norm)) {
      std::ostringstream msg;
      msg << "non-finite GRPO update at step " << res.metrics.step << " epoch " << epoch
          << ": objective=" << value << " grad_norm=" << norm
          << " current_hash=" << parameter_hash(state.current)
          << " reference_hash=" << parameter_hash(state.reference);
      throw RunFailure(msg.str());
    }
    if (epoch == 0) {
      res.metrics.objective = value;
      res.metrics.grad_norm = norm;
      res.metrics.mean_kl = kl;
      if (config.kl_ceiling > 0.0 && kl > config.kl_ceiling) {
        std::ostringstream msg;
        msg << "mean KL " << kl << " exceeds ceiling " << config.kl_ceiling << " at step "
            << res.metrics.step;
        throw RunFailure(msg.str());
      }
    }
    state.optimizer.ascend(state.current.params(), grad);
  }
  ++state.step;
  res.metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

TrainResult train(const PolicyModel& initial, const PromptCorpus& corpus,
                  const AsrChannelModel& channel, const RewardConfig& reward_config,
                  const GrpoConfig& config, const TrainHooks& hooks) {
  config.validate();
  reward_config.validate();
  const auto train_ids = corpus.indices(Split::kTrain);
  if (train_ids.empty()) throw ConfigError("train: corpus has no train split");
  TrainState state(initial, config);
  TrainResult result{initial, {}, 0, 0};
  result.reference_hash_start = parameter_hash(state.reference);
  const SeededRng root(config.seed);

  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::uint64_t pass = 0;
  std::vector<std::size_t> batch;
  for (int u = 0; u < config.updates; ++u) {
    batch.clear();
    while (static_cast<int>(batch.size()) < config.batch_prompts) {
      if (cursor == order.size()) {
        order = train_ids;
        SeededRng shuffle = root.split(kShuffleStream).split(pass++);
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
        }
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    UpdateResult upd = run_update(state, batch, corpus, channel, reward_config, config, root);
    result.metrics.push_back(upd.metrics);
    if (hooks.on_update) hooks.on_update(upd, state);
  }
  result.reference_hash_end = parameter_hash(state.reference);
  result.final_model = state.current;
  return result;
}

}  // namespace asr_grpo

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

#ifndef ASR_GRPO_POLICY_HPP_
#define ASR_GRPO_POLICY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asr_grpo/asr_sim.hpp"
#include "asr_grpo/seqcore.hpp"

namespace asr_grpo {

struct PolicyShape {
  int text_vocab = 0;
  int speech_vocab = 0;
  int frame_rate = 1;
  int hidden = 0;
  int max_len = 0;

  std::size_t param_count() const;
  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

// Autoregressive categorical generator of speech tokens conditioned on a text
// prompt.
//
// Step t is aligned to prompt position a = t / frame_rate (the text
// end-of-sequence id once a runs past the prompt) and computes
//   h_t = tanh(text_embed[y_a] + offset_embed[t % k] + prev_embed[o_{t-1}]
//              + hidden_bias + recur * h_{t-1})
//   logits_t = out_weight h_t + out_bias
// with o_{-1} the start row and h_{-1} = 0; `*` is elementwise.
//
// Flat parameter layout, row-major, in this order:
//   text_embed    text_vocab x hidden
//   offset_embed  frame_rate x hidden
//   prev_embed    (speech_vocab + 1) x hidden   (last row: start of output)
//   hidden_bias   hidden
//   recur         hidden
//   out_weight    speech_vocab x hidden
//   out_bias      speech_vocab
//
// Generation stops after the speech end-of-sequence id (which is kept in the
// output) or at max_len tokens.
class PolicyModel {
 public:
  // All parameters zero: every next-token distribution is uniform.
  PolicyModel(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate, int hidden,
              int max_len);

  // Embeddings drawn N(0, embed_scale^2); recurrence and output layer zero,
  // so the initial policy is still uniform.
  static PolicyModel initialize(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate,
                                int hidden, int max_len, double embed_scale, SeededRng& rng);

  const PolicyShape& shape() const { return shape_; }
  const VocabPtr& text_vocab() const { return text_vocab_; }
  const VocabPtr& speech_vocab() const { return speech_vocab_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  struct Layout {
    std::size_t text_embed, offset_embed, prev_embed, hidden_bias, recur, out_weight,
        out_bias, total;
  };
  const Layout& layout() const { return layout_; }

 private:
  PolicyShape shape_;
  VocabPtr text_vocab_;
  VocabPtr speech_vocab_;
  Layout layout_;
  std::vector<double> params_;
};

struct SampleOptions {
  double temperature = 1.0;
  // Argmax decoding (lowest id on ties); temperature is ignored.
  bool greedy = false;
};

struct Rollout {
  TokenSequence prompt{nullptr};
  TokenSequence output{nullptr};
  std::vector<double> logp_current;   // untempered, under the sampling policy
  std::vector<double> logp_sampling;  // under the tempered distribution actually sampled
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  bool terminated = false;            // end token emitted (vs truncated at max_len)

  // Output tokens before the end-of-sequence id: what gets scored as speech.
  TokenSequence speech() const;
};

// Draws one output. logp_old is set equal to logp_current (the sampling model
// is the old-policy snapshot); logp_ref is left for the caller.
Rollout sample(const PolicyModel& model, const TokenSequence& prompt,
               const SampleOptions& options, SeededRng& rng);

// Teacher-forced untempered log-probabilities of each output token.
std::vector<double> log_prob(const PolicyModel& model, const TokenSequence& prompt,
                             const TokenSequence& output);

// Full log-distribution over speech tokens after `prefix`.
std::vector<double> next_token_log_probs(const PolicyModel& model, const TokenSequence& prompt,
                                         std::span<const TokenId> prefix);

using GradientVector = std::vector<double>;

// Accumulates sum_t coeff[t] * d log pi(o_t) / d params into `gradient`.
void accumulate_log_prob_gradient(const PolicyModel& model, const TokenSequence& prompt,
                                  const TokenSequence& output, std::span<const double> coeff,
                                  std::span<double> gradient);

struct ObjectiveOptions {
  double beta = 0.0;
  // PPO-style ratio clipping half-width; 0 disables it.
  double clip_epsilon = 0.0;
};

struct ObjectiveResult {
  double value = 0.0;
  GradientVector gradient;
  double mean_kl = 0.0;  // token-weighted mean of the KL estimate
};

// The group objective
//   1/G sum_i 1/|o_i| sum_t [ pi/pi_old * A_i - beta * KL_t ]
// with pi evaluated under `model` and pi_old / pi_ref taken from the
// rollouts' recorded log-probs, plus its exact gradient. Only pi carries
// gradient. Throws ConfigError when fewer than two rollouts are given.
ObjectiveResult objective_gradient(const PolicyModel& model, std::span<const Rollout> rollouts,
                                   std::span<const double> advantages,
                                   const ObjectiveOptions& options);

struct PretrainConfig {
  int steps = 0;
  int batch = 16;
  double learning_rate = 1e-3;
  // Number of text tokens whose teacher code is systematically swapped for
  // the next token's code, and the probability of that swap.
  int decoy_tokens = 2;
  double decoy_prob = 0.65;
  // Probability that any other frame is replaced by a random signature.
  double label_noise = 0.05;
};

// Maximum-likelihood training (Adam) on noisy teacher encodings of the train
// split: each prompt token's perfect channel code, corrupted as described in
// PretrainConfig, followed by the end token.
PolicyModel pretrain_supervised(const PolicyModel& model, const PromptCorpus& corpus,
                                const AsrChannelModel& channel, const PretrainConfig& config,
                                SeededRng& rng);

// Checkpoint: one text header line
//   asr_grpo_policy v1 text_vocab=.. speech_vocab=.. frame_rate=.. hidden=.. max_len=.. params=..
// followed by the parameters as little-endian IEEE-754 doubles.
void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model);
PolicyModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const PolicyModel& model);

// FNV-1a over the raw parameter bytes.
std::uint64_t parameter_hash(const PolicyModel& model);

}  // namespace asr_grpo

#endif  // ASR_GRPO_POLICY_HPP_

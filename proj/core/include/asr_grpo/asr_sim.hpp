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

#ifndef ASR_GRPO_ASR_SIM_HPP_
#define ASR_GRPO_ASR_SIM_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "asr_grpo/seqcore.hpp"

namespace asr_grpo {

// A chunk of k consecutive speech tokens. The trailing chunk of a sequence
// whose length is not a multiple of k is kept with `partial` set; the channel
// scores it with the pad signature.
struct Frame {
  std::vector<TokenId> tokens;
  bool partial = false;
};

std::vector<Frame> frames(const TokenSequence& speech, int k);

// Fixed, non-trainable stand-in for an off-the-shelf recognizer.
//
// The speech sequence is cut into frames of k tokens (the "encoder output");
// each frame's signature, the ordered k-tuple of content speech ids, selects a
// row of a row-stochastic emission matrix over text tokens. Text positions
// are conditionally independent given their frame, so the teacher-forced
// score of the n-th ground-truth token only looks at frame n.
//
// Signatures are indexed lexicographically with the first token most
// significant: s = sum_j t_j * C^(k-1-j), C = speech content size. Index C^k
// is the pad signature, used for partial frames, frames holding reserved ids,
// and truth positions past the last frame.
class AsrChannelModel {
 public:
  AsrChannelModel(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate,
                  double smoothing_eps, std::vector<double> emission);

  // Every text content token gets a distinct random code signature that
  // emits it with probability ~1; other rows are uniform.
  static AsrChannelModel identity(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate,
                                  double smoothing_eps, SeededRng& rng);

  // Like identity, but a signature sharing m positions with a code leans
  // toward that code's token with weight exp(2 m), and every non-pad row is
  // mixed with `noise` of uniform mass. Partial matches thus earn partial
  // confidence.
  static AsrChannelModel confusable(VocabPtr text_vocab, VocabPtr speech_vocab,
                                    int frame_rate, double smoothing_eps, double noise,
                                    SeededRng& rng);

  const VocabPtr& text_vocab() const { return text_vocab_; }
  const VocabPtr& speech_vocab() const { return speech_vocab_; }
  int frame_rate() const { return frame_rate_; }
  double smoothing_eps() const { return eps_; }
  int num_signatures() const { return num_signatures_; }
  int pad_signature() const { return num_signatures_ - 1; }

  int signature_of(std::span<const TokenId> frame_tokens) const;
  int signature_of(const Frame& frame) const { return signature_of(frame.tokens); }
  std::vector<TokenId> signature_tokens(int signature) const;

  std::span<const double> row(int signature) const;
  double prob(int signature, TokenId text) const;
  double log_prob(int signature, TokenId text) const;
  // Most likely text token for a signature; lowest id wins ties.
  TokenId decode(int signature) const { return argmax_[static_cast<std::size_t>(signature)]; }

  // The signature that gives `text` its highest probability (lowest index on
  // ties), i.e. the channel's perfect code for that token.
  int code_signature(TokenId text) const;
  // Concatenated perfect codes of every token in `text`.
  TokenSequence encode(const TokenSequence& text) const;

  // Copy with one emission row replaced (the row is validated like any other).
  AsrChannelModel with_row(int signature, std::vector<double> new_row) const;

 private:
  std::size_t index(int signature, TokenId text) const;

  VocabPtr text_vocab_;
  VocabPtr speech_vocab_;
  int frame_rate_;
  double eps_;
  int num_signatures_;
  std::vector<double> emission_;   // num_signatures x text size, row-major
  std::vector<double> log_emission_;
  std::vector<TokenId> argmax_;
  std::vector<int> codes_;         // per text id
};

// Output of scoring one utterance against its ground truth.
struct AsrScore {
  TokenSequence transcript;
  double nll_total = 0.0;
  double nll_per_token = 0.0;
  std::size_t n_tokens = 0;
};

// One text token per frame: the argmax of that frame's emission row.
TokenSequence transcribe(const AsrChannelModel& model, const TokenSequence& speech);

// -sum_n log P(truth_n | frame_n). Positions past the last frame are scored
// against the pad row, so a length mismatch costs likelihood instead of
// failing. Throws UndefinedMetricError for an empty truth.
AsrScore teacher_forced_nll(const AsrChannelModel& model, const TokenSequence& speech,
                            const TokenSequence& truth);

// Channel file: header "k=<int> vtext=<int> vspeech=<int> eps=<float>", then
// one line per signature (lexicographic order, pad last) with its emission
// row as plain-text floats. Values round-trip exactly.
void write_channel(const std::filesystem::path& path, const AsrChannelModel& model);
AsrChannelModel read_channel(const std::filesystem::path& path);

}  // namespace asr_grpo

#endif  // ASR_GRPO_ASR_SIM_HPP_

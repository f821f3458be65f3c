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

#ifndef ASR_GRPO_EDITDIST_HPP_
#define ASR_GRPO_EDITDIST_HPP_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "asr_grpo/seqcore.hpp"

namespace asr_grpo {

struct EditDistanceResult {
  std::size_t distance = 0;
  std::size_t ref_len = 0;
  double cer = 0.0;  // distance / ref_len; only meaningful when ref_len > 0
};

// Unit-cost Levenshtein distance over raw token ids.
std::size_t edit_distance(std::span<const TokenId> reference,
                          std::span<const TokenId> hypothesis);

// Same, after checking both sequences share a vocabulary.
std::size_t edit_distance(const TokenSequence& reference, const TokenSequence& hypothesis);

EditDistanceResult compare_sequences(const TokenSequence& reference,
                                     const TokenSequence& hypothesis);

// edit_distance / |reference|. Not clamped, so it exceeds 1 when the
// hypothesis is much longer than the reference.
double utterance_cer(const TokenSequence& reference, const TokenSequence& hypothesis);

using CerPair = std::pair<TokenSequence, TokenSequence>;  // (reference, hypothesis)

// Total edit distance over total reference length. This is not the mean of
// per-utterance CERs.
double corpus_cer(std::span<const CerPair> pairs);

// Same aggregation from precomputed (distance, ref_len) rows.
double corpus_cer(std::span<const EditDistanceResult> rows);

}  // namespace asr_grpo

#endif  // ASR_GRPO_EDITDIST_HPP_

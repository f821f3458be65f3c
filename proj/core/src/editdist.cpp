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

#include "asr_grpo/editdist.hpp"

#include <algorithm>
#include <numeric>

#include "asr_grpo/error.hpp"

namespace asr_grpo {

std::size_t edit_distance(std::span<const TokenId> reference,
                          std::span<const TokenId> hypothesis) {
  if (reference.size() < hypothesis.size()) std::swap(reference, hypothesis);
  // Single rolling row over the shorter sequence.
  std::vector<std::size_t> row(hypothesis.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= reference.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hypothesis.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (reference[i - 1] != hypothesis[j - 1] ? 1 : 0);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row.back();
}

std::size_t edit_distance(const TokenSequence& reference, const TokenSequence& hypothesis) {
  if (!same_vocabulary(reference.vocab(), hypothesis.vocab())) {
    throw UsageError("edit_distance: sequences use different vocabularies");
  }
  return edit_distance(reference.view(), hypothesis.view());
}

EditDistanceResult compare_sequences(const TokenSequence& reference,
                                     const TokenSequence& hypothesis) {
  EditDistanceResult r;
  r.distance = edit_distance(reference, hypothesis);
  r.ref_len = reference.size();
  r.cer = r.ref_len ? static_cast<double>(r.distance) / static_cast<double>(r.ref_len) : 0.0;
  return r;
}

double utterance_cer(const TokenSequence& reference, const TokenSequence& hypothesis) {
  if (reference.empty()) throw UndefinedMetricError("CER of an empty reference");
  return compare_sequences(reference, hypothesis).cer;
}

double corpus_cer(std::span<const CerPair> pairs) {
  if (pairs.empty()) throw UndefinedMetricError("corpus CER over no utterances");
  std::vector<EditDistanceResult> rows;
  rows.reserve(pairs.size());
  for (const auto& [ref, hyp] : pairs) {
    if (ref.empty()) throw UndefinedMetricError("corpus CER with an empty reference");
    rows.push_back(compare_sequences(ref, hyp));
  }
  return corpus_cer(rows);
}

double corpus_cer(std::span<const EditDistanceResult> rows) {
  if (rows.empty()) throw UndefinedMetricError("corpus CER over no utterances");
  std::size_t dist = 0;
  std::size_t len = 0;
  for (const auto& r : rows) {
    if (r.ref_len == 0) throw UndefinedMetricError("corpus CER with an empty reference");
    dist += r.distance;
    len += r.ref_len;
  }
  return static_cast<double>(dist) / static_cast<double>(len);
}

}  // namespace asr_grpo

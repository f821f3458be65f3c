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

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "asr_grpo/editdist.hpp"
#include "asr_grpo/error.hpp"

namespace asr_grpo {
namespace {

// Plain exponential recursion over suffixes.
std::size_t oracle(const std::vector<TokenId>& a, std::size_t i, const std::vector<TokenId>& b,
                   std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = oracle(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const std::size_t del = oracle(a, i + 1, b, j) + 1;
  const std::size_t ins = oracle(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

TokenSequence seq(const VocabPtr& v, std::vector<TokenId> t) { return TokenSequence(v, std::move(t)); }

class EditDistanceTest : public ::testing::Test {
 protected:
  VocabPtr v = Vocabulary::with_eos("text", 32);
};

TEST_F(EditDistanceTest, Identity) {
  const auto x = seq(v, {1, 2, 3, 4});
  EXPECT_EQ(edit_distance(x, x), 0u);
  EXPECT_DOUBLE_EQ(utterance_cer(x, x), 0.0);
}

TEST_F(EditDistanceTest, EmptyReference) {
  EXPECT_EQ(edit_distance(seq(v, {}), seq(v, {1, 2, 3})), 3u);
  EXPECT_THROW(utterance_cer(seq(v, {}), seq(v, {1})), UndefinedMetricError);
}

TEST_F(EditDistanceTest, KittenSitting) {
  // Letters as alphabet positions.
  const auto kitten = seq(v, {10, 8, 19, 19, 4, 13});
  const auto sitting = seq(v, {18, 8, 19, 19, 8, 13, 6});
  const std::vector<TokenId> a(kitten.tokens()), b(sitting.tokens());
  const auto expected = oracle(a, 0, b, 0);
  EXPECT_EQ(expected, 3u);
  EXPECT_EQ(edit_distance(kitten, sitting), expected);
}

TEST_F(EditDistanceTest, CerCases) {
  const auto ref = seq(v, {0, 1, 2, 3});
  EXPECT_DOUBLE_EQ(utterance_cer(ref, seq(v, {})), 1.0);
  std::vector<TokenId> far(12, 9);
  const std::vector<TokenId> r(ref.tokens());
  EXPECT_EQ(oracle(r, 0, far, 0), 12u);
  EXPECT_DOUBLE_EQ(utterance_cer(ref, seq(v, far)), 3.0);
}

TEST_F(EditDistanceTest, CorpusAggregation) {
  const auto a = seq(v, {0, 1, 2});
  std::vector<CerPair> same{{a, a}, {a, a}};
  EXPECT_DOUBLE_EQ(corpus_cer(same), 0.0);

  std::vector<EditDistanceResult> rows{{1, 10, 0.1}, {3, 10, 0.3}};
  EXPECT_DOUBLE_EQ(corpus_cer(rows), 0.2);

  std::vector<EditDistanceResult> skewed{{0, 30, 0.0}, {3, 10, 0.3}};
  const double per_utt_mean = (0.0 + 0.3) / 2.0;
  EXPECT_DOUBLE_EQ(corpus_cer(skewed), 3.0 / 40.0);
  EXPECT_DOUBLE_EQ(per_utt_mean, 0.15);
  EXPECT_NE(corpus_cer(skewed), per_utt_mean);
}

TEST_F(EditDistanceTest, CorpusOfOnePairIsUtteranceCer) {
  SeededRng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TokenId> r(1 + rng.uniform_index(8)), h(rng.uniform_index(9));
    for (auto& t : r) t = static_cast<TokenId>(rng.uniform_index(5));
    for (auto& t : h) t = static_cast<TokenId>(rng.uniform_index(5));
    std::vector<CerPair> one{{seq(v, r), seq(v, h)}};
    EXPECT_EQ(corpus_cer(one), utterance_cer(seq(v, r), seq(v, h)));
  }
}

TEST_F(EditDistanceTest, EmptyCorpusUndefined) {
  std::vector<CerPair> none;
  EXPECT_THROW(corpus_cer(none), UndefinedMetricError);
  std::vector<CerPair> empty_ref{{seq(v, {}), seq(v, {1})}};
  EXPECT_THROW(corpus_cer(empty_ref), UndefinedMetricError);
}

TEST_F(EditDistanceTest, VocabularyMismatchRejected) {
  auto other = Vocabulary::with_eos("speech", 32);
  EXPECT_THROW(edit_distance(seq(v, {1}), TokenSequence(other, {1})), UsageError);
}

TEST_F(EditDistanceTest, MatchesOracleOnRandomLongerPairs) {
  SeededRng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TokenId> a(rng.uniform_index(8)), b(rng.uniform_index(8));
    for (auto& t : a) t = static_cast<TokenId>(rng.uniform_index(4));
    for (auto& t : b) t = static_cast<TokenId>(rng.uniform_index(4));
    ASSERT_EQ(edit_distance(a, b), oracle(a, 0, b, 0));
  }
}

TEST_F(EditDistanceTest, SymmetryAndTriangle) {
  SeededRng rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<TokenId> a(rng.uniform_index(12)), b(rng.uniform_index(12)),
        c(rng.uniform_index(12));
    for (auto* s : {&a, &b, &c}) {
      for (auto& t : *s) t = static_cast<TokenId>(rng.uniform_index(4));
    }
    const auto ab = edit_distance(a, b), ba = edit_distance(b, a);
    ASSERT_EQ(ab, ba);
    ASSERT_LE(edit_distance(a, c), ab + edit_distance(b, c));
  }
}

}  // namespace
}  // namespace asr_grpo

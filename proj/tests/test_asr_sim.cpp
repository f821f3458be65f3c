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

#include <cmath>
#include <filesystem>
#include <vector>

#include "asr_grpo/asr_sim.hpp"
#include "asr_grpo/editdist.hpp"
#include "asr_grpo/error.hpp"

namespace asr_grpo {
namespace {

namespace fs = std::filesystem;

// text: 2 content + eos; speech: 4 content + eos; k = 2 -> 16 + 1 signatures.
AsrChannelModel small_uniform(double eps = 0.01) {
  auto vt = Vocabulary::with_eos("text", 3);
  auto vs = Vocabulary::with_eos("speech", 5);
  std::vector<double> e(17 * 3, 1.0 / 3.0);
  return AsrChannelModel(vt, vs, 2, eps, e);
}

TEST(Frames, Chunking) {
  auto vs = Vocabulary::with_eos("speech", 16);
  EXPECT_EQ(frames(TokenSequence(vs, {1, 2, 3, 4, 5, 6}), 2).size(), 3u);
  const auto f5 = frames(TokenSequence(vs, {1, 2, 3, 4, 5}), 2);
  ASSERT_EQ(f5.size(), 3u);
  EXPECT_FALSE(f5[1].partial);
  EXPECT_TRUE(f5[2].partial);
  EXPECT_EQ(f5[2].tokens, std::vector<TokenId>{5});
  EXPECT_TRUE(frames(TokenSequence(vs, {}), 2).empty());
}

TEST(AsrChannel, SignatureIndexing) {
  const auto ch = small_uniform();
  EXPECT_EQ(ch.num_signatures(), 17);
  EXPECT_EQ(ch.signature_of(std::vector<TokenId>{3, 3}), 15);
  EXPECT_EQ(ch.signature_of(std::vector<TokenId>{1, 2}), 6);
  EXPECT_EQ(ch.signature_of(std::vector<TokenId>{1}), ch.pad_signature());
  EXPECT_EQ(ch.signature_of(std::vector<TokenId>{4, 0}), ch.pad_signature());
  for (int s = 0; s < 16; ++s) EXPECT_EQ(ch.signature_of(ch.signature_tokens(s)), s);
}

TEST(AsrChannel, ConstructedArgmaxRow) {
  const auto ch = small_uniform().with_row(15, {0.05, 0.9, 0.05});
  auto vs = ch.speech_vocab();
  const auto t = transcribe(ch, TokenSequence(vs, {3, 3}));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.tokens()[0], 1);
}

TEST(AsrChannel, RejectsInvalidRows) {
  auto ch = small_uniform();
  EXPECT_THROW(ch.with_row(0, {0.5, 0.5, 0.5}), FormatError);
  EXPECT_THROW(ch.with_row(0, {0.995, 0.005, 0.0}), FormatError);
  EXPECT_THROW(ch.with_row(0, {0.5, 0.5}), UsageError);
  EXPECT_THROW(small_uniform(0.5), ConfigError);
}

TEST(AsrChannel, IdentityRoundTripExhaustive) {
  SeededRng rng(5);
  auto vt = Vocabulary::with_eos("text", 8);
  const auto ch = AsrChannelModel::identity(vt, Vocabulary::with_eos("speech", 16), 2, 1e-4, rng);
  std::vector<TokenId> y;
  std::size_t checked = 0;
  // Every sequence of length <= 4 over the 7 content tokens.
  for (int len = 0; len <= 4; ++len) {
    int total = 1;
    for (int i = 0; i < len; ++i) total *= 7;
    for (int code = 0; code < total; ++code) {
      y.assign(static_cast<std::size_t>(len), 0);
      int c = code;
      for (int i = 0; i < len; ++i, c /= 7) y[static_cast<std::size_t>(i)] = c % 7;
      const TokenSequence truth(vt, y);
      const TokenSequence hyp = transcribe(ch, ch.encode(truth));
      ASSERT_EQ(hyp, truth);
      if (len > 0) {
        ASSERT_EQ(utterance_cer(truth, hyp), 0.0);
      }
      ++checked;
    }
  }
  EXPECT_EQ(checked, 1u + 7u + 49u + 343u + 2401u);
}

TEST(AsrChannel, EmptySpeechEmptyTranscript) {
  const auto ch = small_uniform();
  EXPECT_TRUE(transcribe(ch, TokenSequence(ch.speech_vocab(), {})).empty());
}

TEST(AsrChannel, PerfectEncodingNearZeroNll) {
  SeededRng rng(1);
  auto vt = Vocabulary::with_eos("text", 8);
  const auto ch = AsrChannelModel::identity(vt, Vocabulary::with_eos("speech", 16), 2, 1e-12, rng);
  const TokenSequence truth(vt, {0, 3, 6, 2, 2});
  const auto s = teacher_forced_nll(ch, ch.encode(truth), truth);
  EXPECT_GE(s.nll_total, 0.0);
  EXPECT_LT(s.nll_total, 1e-9);
}

TEST(AsrChannel, UniformRowsGiveLogVocab) {
  auto vt = Vocabulary::with_eos("text", 8);
  auto vs = Vocabulary::with_eos("speech", 5);
  const AsrChannelModel ch(vt, vs, 2, 1e-3, std::vector<double>(17 * 8, 0.125));
  const TokenSequence truth(vt, {1, 2, 3});
  const auto s = teacher_forced_nll(ch, TokenSequence(vs, {0, 1, 2, 3, 0, 0}), truth);
  EXPECT_NEAR(s.nll_per_token, std::log(8.0), 1e-12);
  EXPECT_EQ(s.n_tokens, 3u);
}

TEST(AsrChannel, MissingFramesScoredAgainstPad) {
  auto ch = small_uniform()
                .with_row(5, {0.7, 0.2, 0.1})
                .with_row(10, {0.1, 0.6, 0.3})
                .with_row(16, {0.5, 0.3, 0.2});
  auto vt = ch.text_vocab();
  auto vs = ch.speech_vocab();
  const TokenSequence speech(vs, {1, 1, 2, 2});  // signatures 5, 10
  const TokenSequence truth(vt, {0, 1, 1, 0});
  const double expected = -(std::log(0.7) + std::log(0.6) + std::log(0.3) + std::log(0.5));
  const auto full = teacher_forced_nll(ch, speech, truth);
  EXPECT_NEAR(full.nll_total, expected, 1e-12);
  const auto prefix = teacher_forced_nll(ch, speech, TokenSequence(vt, {0, 1}));
  EXPECT_GT(full.nll_total, prefix.nll_total);
  EXPECT_THROW(teacher_forced_nll(ch, speech, TokenSequence(vt, {})), UndefinedMetricError);
}

TEST(AsrChannel, NllFiniteNonNegativeFuzz) {
  SeededRng rng(31);
  auto vt = Vocabulary::with_eos("text", 8);
  auto vs = Vocabulary::with_eos("speech", 16);
  for (int c = 0; c < 5; ++c) {
    const auto ch = AsrChannelModel::confusable(vt, vs, 2, 1e-4, 0.1 * c, rng);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<TokenId> sp(rng.uniform_index(20)), tr(1 + rng.uniform_index(9));
      for (auto& t : sp) t = static_cast<TokenId>(rng.uniform_index(16));
      for (auto& t : tr) t = static_cast<TokenId>(rng.uniform_index(7));
      const auto s = teacher_forced_nll(ch, TokenSequence(vs, sp), TokenSequence(vt, tr));
      ASSERT_TRUE(std::isfinite(s.nll_total));
      ASSERT_GE(s.nll_total, 0.0);
    }
  }
}

TEST(AsrChannel, SharpeningNeverIncreasesNll) {
  SeededRng rng(41);
  auto vt = Vocabulary::with_eos("text", 8);
  auto vs = Vocabulary::with_eos("speech", 5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ch = AsrChannelModel::confusable(vt, vs, 2, 1e-3, rng.uniform01(), rng);
    std::vector<TokenId> sp(2 * (1 + rng.uniform_index(5)));
    for (auto& t : sp) t = static_cast<TokenId>(rng.uniform_index(4));
    std::vector<TokenId> tr(sp.size() / 2);
    for (auto& t : tr) t = static_cast<TokenId>(rng.uniform_index(7));
    const std::size_t n = rng.uniform_index(tr.size());
    auto sig_at = [&](std::size_t m) {
      return ch.signature_of(std::vector<TokenId>{sp[2 * m], sp[2 * m + 1]});
    };
    const int sig = sig_at(n);
    // Positions sharing the row must want the same token.
    for (std::size_t m = 0; m < tr.size(); ++m) {
      if (sig_at(m) == sig) tr[m] = tr[n];
    }
    const double a = rng.uniform01();
    std::vector<double> row(ch.row(sig).begin(), ch.row(sig).end());
    double moved = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (static_cast<TokenId>(j) == tr[n]) continue;
      const double d = a * (row[j] - ch.smoothing_eps());
      row[j] -= d;
      moved += d;
    }
    row[static_cast<std::size_t>(tr[n])] += moved;
    const auto sharper = ch.with_row(sig, row);
    const TokenSequence speech(vs, sp), truth(vt, tr);
    ASSERT_LE(teacher_forced_nll(sharper, speech, truth).nll_total,
              teacher_forced_nll(ch, speech, truth).nll_total + 1e-12);
  }
}

TEST(AsrChannel, TranscribeIsPure) {
  SeededRng rng(2);
  auto vs = Vocabulary::with_eos("speech", 16);
  const auto ch = AsrChannelModel::confusable(Vocabulary::with_eos("text", 8), vs, 2, 1e-4, 0.2, rng);
  const TokenSequence sp(vs, {0, 3, 9, 9, 14, 2, 7});
  const auto a = transcribe(ch, sp);
  for (int i = 0; i < 10; ++i) ASSERT_EQ(transcribe(ch, sp), a);
}

TEST(AsrChannel, ConfusableCodesDecodeAndPartialMatchesLean) {
  SeededRng rng(8);
  auto vt = Vocabulary::with_eos("text", 8);
  auto vs = Vocabulary::with_eos("speech", 16);
  const auto ch = AsrChannelModel::confusable(vt, vs, 2, 1e-4, 0.05, rng);
  for (TokenId y = 0; y < 7; ++y) {
    const int code = ch.code_signature(y);
    EXPECT_EQ(ch.decode(code), y);
    auto toks = ch.signature_tokens(code);
    toks[1] = (toks[1] + 1) % 15;
    const int near = ch.signature_of(toks);
    EXPECT_GT(ch.prob(near, y), 1.0 / 8.0);
    EXPECT_LT(ch.prob(near, y), ch.prob(code, y));
  }
}

TEST(AsrChannel, FileRoundTripIsExact) {
  const auto dir = fs::temp_directory_path() / "asr_grpo_test_channel";
  fs::create_directories(dir);
  SeededRng rng(4);
  const auto ch = AsrChannelModel::confusable(Vocabulary::with_eos("text", 8),
                                              Vocabulary::with_eos("speech", 16), 2, 1e-4, 0.3,
                                              rng);
  write_channel(dir / "ch.txt", ch);
  const auto back = read_channel(dir / "ch.txt");
  EXPECT_EQ(back.frame_rate(), 2);
  EXPECT_EQ(back.smoothing_eps(), 1e-4);
  ASSERT_EQ(back.num_signatures(), ch.num_signatures());
  for (int s = 0; s < ch.num_signatures(); ++s) {
    const auto a = ch.row(s), b = back.row(s);
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_EQ(a[j], b[j]);
  }
  for (TokenId y = 0; y < 7; ++y) EXPECT_EQ(back.code_signature(y), ch.code_signature(y));
}

}  // namespace
}  // namespace asr_grpo

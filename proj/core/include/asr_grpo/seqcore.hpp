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

#ifndef ASR_GRPO_SEQCORE_HPP_
#define ASR_GRPO_SEQCORE_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace asr_grpo {

using TokenId = std::int32_t;

// A dense alphabet of token ids [0, size). Reserved (special) ids sit at the
// top of the range; everything below them is a content token.
class Vocabulary {
 public:
  Vocabulary(std::string name, int size, std::vector<TokenId> reserved);

  // Vocabulary whose only reserved id is end-of-sequence at size - 1.
  static std::shared_ptr<const Vocabulary> with_eos(std::string name, int size);

  const std::string& name() const { return name_; }
  int size() const { return size_; }
  const std::vector<TokenId>& reserved() const { return reserved_; }
  TokenId eos() const { return eos_; }
  int content_size() const { return size_ - static_cast<int>(reserved_.size()); }
  bool contains(TokenId id) const { return id >= 0 && id < size_; }
  bool is_reserved(TokenId id) const;
  bool is_content(TokenId id) const { return contains(id) && !is_reserved(id); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.name_ == b.name_ && a.size_ == b.size_ && a.reserved_ == b.reserved_;
  }

 private:
  std::string name_;
  int size_;
  std::vector<TokenId> reserved_;  // sorted ascending
  TokenId eos_;
};

using VocabPtr = std::shared_ptr<const Vocabulary>;

bool same_vocabulary(const VocabPtr& a, const VocabPtr& b);

// Token ids validated against a vocabulary at construction.
class TokenSequence {
 public:
  TokenSequence(VocabPtr vocab, std::vector<TokenId> tokens);
  explicit TokenSequence(VocabPtr vocab) : vocab_(std::move(vocab)) {}

  const VocabPtr& vocab() const { return vocab_; }
  const std::vector<TokenId>& tokens() const { return tokens_; }
  std::span<const TokenId> view() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  TokenId operator[](std::size_t i) const { return tokens_[i]; }

  friend bool operator==(const TokenSequence& a, const TokenSequence& b) {
    return same_vocabulary(a.vocab_, b.vocab_) && a.tokens_ == b.tokens_;
  }

 private:
  VocabPtr vocab_;
  std::vector<TokenId> tokens_;
};

enum class Split { kTrain, kHeldOut };

// Prompt texts over the text vocabulary with a train / held-out tag each.
// Immutable after construction.
class PromptCorpus {
 public:
  PromptCorpus(VocabPtr vocab, std::vector<TokenSequence> entries,
               std::vector<Split> splits);

  const VocabPtr& vocab() const { return vocab_; }
  const std::vector<TokenSequence>& entries() const { return entries_; }
  const std::vector<Split>& splits() const { return splits_; }
  std::size_t size() const { return entries_.size(); }
  const TokenSequence& operator[](std::size_t i) const { return entries_[i]; }

  std::vector<std::size_t> indices(Split split) const;

  friend bool operator==(const PromptCorpus& a, const PromptCorpus& b) {
    return same_vocabulary(a.vocab_, b.vocab_) && a.entries_ == b.entries_ &&
           a.splits_ == b.splits_;
  }

 private:
  VocabPtr vocab_;
  std::vector<TokenSequence> entries_;
  std::vector<Split> splits_;
};

// Reproducible random source.
//
// Algorithm: std::mt19937_64 (its output sequence is fixed by the C++
// standard). Derived quantities never go through <random> distributions,
// whose algorithms are implementation-defined:
//   uniform01()      top 53 bits of one draw, scaled by 2^-53, in [0, 1)
//   uniform_index(n) rejection sampling on one or more draws, in [0, n)
//   normal()         Box-Muller on two uniform01() draws (cosine branch)
// split(stream) returns an independent generator seeded with
//   splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15))
// which is how parallel consumers get their own instance.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  SeededRng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Draws `count` prompts with lengths uniform in [min_len, max_len] and tokens
// uniform over the content ids of `text_vocab`. The last `heldout_count`
// entries are tagged held-out and redrawn until none duplicates a train
// entry, so the two splits never share a prompt.
PromptCorpus generate_corpus(SeededRng& rng, int count, int min_len, int max_len,
                             const VocabPtr& text_vocab, int heldout_count = 0);

// Corpus file: "vocab_size=<n>" header, then one line of space-separated ids
// per entry. The sidecar "<path>.split" lists held-out line indices (0-based),
// one per line. Writes are atomic.
void write_corpus(const std::filesystem::path& path, const PromptCorpus& corpus);
PromptCorpus read_corpus(const std::filesystem::path& path);
std::filesystem::path split_sidecar_path(const std::filesystem::path& path);

// Writes via a temporary file in the same directory followed by rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace asr_grpo

#endif  // ASR_GRPO_SEQCORE_HPP_

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

#include "asr_grpo/seqcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "asr_grpo/error.hpp"

namespace asr_grpo {

Vocabulary::Vocabulary(std::string name, int size, std::vector<TokenId> reserved)
    : name_(std::move(name)), size_(size), reserved_(std::move(reserved)) {
  std::sort(reserved_.begin(), reserved_.end());
  if (size_ < 2) {
    throw ConfigError("vocabulary '" + name_ + "' needs at least 2 ids, got " +
                      std::to_string(size_));
  }
  if (reserved_.empty()) {
    throw ConfigError("vocabulary '" + name_ + "' needs an end-of-sequence id");
  }
  if (std::adjacent_find(reserved_.begin(), reserved_.end()) != reserved_.end()) {
    throw ConfigError("vocabulary '" + name_ + "' has duplicate reserved ids");
  }
  for (TokenId id : reserved_) {
    if (id < 0 || id >= size_) {
      throw ConfigError("vocabulary '" + name_ + "' reserved id " + std::to_string(id) +
                        " out of range");
    }
  }
  if (content_size() < 1) {
    throw ConfigError("vocabulary '" + name_ + "' has no content tokens");
  }
  // Reserved ids must occupy the top of the range.
  if (reserved_.front() != size_ - static_cast<int>(reserved_.size())) {
    throw ConfigError("vocabulary '" + name_ + "' reserved ids must be the top ids");
  }
  eos_ = reserved_.back();
}

std::shared_ptr<const Vocabulary> Vocabulary::with_eos(std::string name, int size) {
  return std::make_shared<const Vocabulary>(std::move(name), size,
                                            std::vector<TokenId>{size - 1});
}

bool Vocabulary::is_reserved(TokenId id) const {
  return std::binary_search(reserved_.begin(), reserved_.end(), id);
}

bool same_vocabulary(const VocabPtr& a, const VocabPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

TokenSequence::TokenSequence(VocabPtr vocab, std::vector<TokenId> tokens)
    : vocab_(std::move(vocab)), tokens_(std::move(tokens)) {
  if (!vocab_) throw UsageError("token sequence without vocabulary");
  for (TokenId t : tokens_) {
    if (!vocab_->contains(t)) {
      throw UsageError("token id " + std::to_string(t) + " outside vocabulary '" +
                       vocab_->name() + "' of size " + std::to_string(vocab_->size()));
    }
  }
}

PromptCorpus::PromptCorpus(VocabPtr vocab, std::vector<TokenSequence> entries,
                           std::vector<Split> splits)
    : vocab_(std::move(vocab)), entries_(std::move(entries)), splits_(std::move(splits)) {
  if (entries_.empty()) throw ConfigError("prompt corpus is empty");
  if (entries_.size() != splits_.size()) {
    throw ConfigError("prompt corpus needs one split tag per entry");
  }
  for (const auto& e : entries_) {
    if (!same_vocabulary(e.vocab(), vocab_)) {
      throw UsageError("corpus entry over a different vocabulary");
    }
  }
}

std::vector<std::size_t> PromptCorpus::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i] == split) out.push_back(i);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double SeededRng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw UsageError("uniform_index over an empty range");
  // Largest multiple of n representable; draws at or above it are rejected.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
  std::uint64_t x = engine_();
  while (x > limit) x = engine_();
  return x % n;
}

double SeededRng::normal() {
  double u1 = uniform01();
  const double u2 = uniform01();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeededRng SeededRng::split(std::uint64_t stream) const {
  return SeededRng(splitmix64(seed_ ^ splitmix64(stream + 0x9E3779B97F4A7C15ULL)));
}

namespace {

TokenSequence random_prompt(SeededRng& rng, int min_len, int max_len,
                            const VocabPtr& vocab) {
  const auto span = static_cast<std::uint64_t>(max_len - min_len + 1);
  const int len = min_len + static_cast<int>(rng.uniform_index(span));
  std::vector<TokenId> tokens(static_cast<std::size_t>(len));
  const auto content = static_cast<std::uint64_t>(vocab->content_size());
  for (auto& t : tokens) t = static_cast<TokenId>(rng.uniform_index(content));
  return TokenSequence(vocab, std::move(tokens));
}

}  // namespace

PromptCorpus generate_corpus(SeededRng& rng, int count, int min_len, int max_len,
                             const VocabPtr& text_vocab, int heldout_count) {
  if (!text_vocab) throw UsageError("generate_corpus without vocabulary");
  if (count < 1) throw ConfigError("corpus count must be >= 1");
  if (min_len < 1 || min_len > max_len) {
    throw ConfigError("corpus length bounds must satisfy 1 <= min_len <= max_len");
  }
  if (heldout_count < 0 || heldout_count > count) {
    throw ConfigError("held-out count must lie in [0, count]");
  }
  const int train_count = count - heldout_count;
  std::vector<TokenSequence> entries;
  std::vector<Split> splits;
  entries.reserve(static_cast<std::size_t>(count));
  std::set<std::vector<TokenId>> train_seen;
  for (int i = 0; i < train_count; ++i) {
    entries.push_back(random_prompt(rng, min_len, max_len, text_vocab));
    train_seen.insert(entries.back().tokens());
    splits.push_back(Split::kTrain);
  }
  constexpr int kMaxRedraws = 10000;
  for (int i = 0; i < heldout_count; ++i) {
    int redraws = 0;
    TokenSequence prompt = random_prompt(rng, min_len, max_len, text_vocab);
    while (train_seen.count(prompt.tokens()) != 0) {
      if (++redraws > kMaxRedraws) {
        throw ConfigError("cannot draw a held-out prompt disjoint from the train split");
      }
      prompt = random_prompt(rng, min_len, max_len, text_vocab);
    }
    entries.push_back(std::move(prompt));
    splits.push_back(Split::kHeldOut);
  }
  return PromptCorpus(text_vocab, std::move(entries), std::move(splits));
}

std::filesystem::path split_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".split";
  return p;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RunFailure("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw RunFailure("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw RunFailure("rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_corpus(const std::filesystem::path& path, const PromptCorpus& corpus) {
  std::ostringstream body;
  body << "vocab_size=" << corpus.vocab()->size() << '\n';
  std::ostringstream split;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& tokens = corpus[i].tokens();
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      if (j) body << ' ';
      body << tokens[j];
    }
    body << '\n';
    if (corpus.splits()[i] == Split::kHeldOut) split << i << '\n';
  }
  write_file_atomic(path, body.str());
  write_file_atomic(split_sidecar_path(path), split.str());
}

PromptCorpus read_corpus(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("vocab_size=", 0) != 0) {
    throw FormatError(path.string() + ": missing 'vocab_size=<n>' header");
  }
  int vocab_size = 0;
  try {
    vocab_size = std::stoi(line.substr(11));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad vocab_size header '" + line + "'");
  }
  auto vocab = Vocabulary::with_eos("text", vocab_size);
  std::vector<TokenSequence> entries;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<TokenId> tokens;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        tokens.push_back(std::stoi(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad token '" + tok + "'");
      }
    }
    try {
      entries.emplace_back(vocab, std::move(tokens));
    } catch (const UsageError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  std::vector<Split> splits(entries.size(), Split::kTrain);
  const auto sidecar = split_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::istringstream sin(read_file(sidecar));
    long long idx = 0;
    while (sin >> idx) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= entries.size()) {
        throw FormatError(sidecar.string() + ": index " + std::to_string(idx) +
                          " out of range");
      }
      splits[static_cast<std::size_t>(idx)] = Split::kHeldOut;
    }
    if (!sin.eof()) throw FormatError(sidecar.string() + ": malformed index list");
  }
  return PromptCorpus(vocab, std::move(entries), std::move(splits));
}

}  // namespace asr_grpo

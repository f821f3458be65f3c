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

#include "asr_grpo/asr_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "asr_grpo/error.hpp"

namespace asr_grpo {

namespace {

int checked_signature_count(int content, int k) {
  long long n = 1;
  for (int i = 0; i < k; ++i) {
    n *= content;
    if (n > 1'000'000) throw ConfigError("channel signature space too large");
  }
  return static_cast<int>(n) + 1;
}

// Mixes a distribution with the smoothing floor: (1 - V eps) q + eps.
void apply_floor(std::span<double> row, double eps) {
  const double keep = 1.0 - static_cast<double>(row.size()) * eps;
  for (double& p : row) p = keep * p + eps;
}

std::vector<int> draw_codes(int text_content, int num_codes, SeededRng& rng) {
  if (text_content > num_codes) {
    throw ConfigError("channel has fewer signatures than text tokens");
  }
  // Partial Fisher-Yates over the non-pad signatures.
  std::vector<int> pool(static_cast<std::size_t>(num_codes));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < text_content; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(num_codes - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(text_content));
  return pool;
}

void check_eps(double eps, int vtext) {
  if (!(eps > 0.0) || eps * vtext >= 1.0) {
    throw ConfigError("smoothing eps must satisfy 0 < eps < 1 / |V_text|");
  }
}

}  // namespace

std::vector<Frame> frames(const TokenSequence& speech, int k) {
  if (k < 1) throw ConfigError("frame rate must be positive");
  std::vector<Frame> out;
  const auto& t = speech.tokens();
  for (std::size_t i = 0; i < t.size(); i += static_cast<std::size_t>(k)) {
    const std::size_t end = std::min(t.size(), i + static_cast<std::size_t>(k));
    Frame f;
    f.tokens.assign(t.begin() + static_cast<std::ptrdiff_t>(i),
                    t.begin() + static_cast<std::ptrdiff_t>(end));
    f.partial = end - i < static_cast<std::size_t>(k);
    out.push_back(std::move(f));
  }
  return out;
}

AsrChannelModel::AsrChannelModel(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate,
                                 double smoothing_eps, std::vector<double> emission)
    : text_vocab_(std::move(text_vocab)),
      speech_vocab_(std::move(speech_vocab)),
      frame_rate_(frame_rate),
      eps_(smoothing_eps),
      emission_(std::move(emission)) {
  if (!text_vocab_ || !speech_vocab_) throw UsageError("channel needs both vocabularies");
  if (frame_rate_ < 1) throw ConfigError("channel frame rate must be positive");
  check_eps(eps_, text_vocab_->size());
  num_signatures_ = checked_signature_count(speech_vocab_->content_size(), frame_rate_);
  const auto vt = static_cast<std::size_t>(text_vocab_->size());
  if (emission_.size() != static_cast<std::size_t>(num_signatures_) * vt) {
    throw FormatError("emission matrix must have " + std::to_string(num_signatures_) +
                      " rows of " + std::to_string(vt) + " entries");
  }
  log_emission_.resize(emission_.size());
  argmax_.resize(static_cast<std::size_t>(num_signatures_));
  for (int s = 0; s < num_signatures_; ++s) {
    auto r = row(s);
    double sum = 0.0;
    for (double p : r) {
      if (!(p >= eps_) || !(p <= 1.0)) {
        throw FormatError("emission row " + std::to_string(s) +
                          " has a probability outside [eps, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw FormatError("emission row " + std::to_string(s) + " sums to " +
                        std::to_string(sum));
    }
    argmax_[static_cast<std::size_t>(s)] =
        static_cast<TokenId>(std::max_element(r.begin(), r.end()) - r.begin());
    for (std::size_t j = 0; j < vt; ++j) {
      log_emission_[static_cast<std::size_t>(s) * vt + j] = std::log(r[j]);
    }
  }
  codes_.resize(vt);
  for (std::size_t j = 0; j < vt; ++j) {
    int best = 0;
    for (int s = 1; s < pad_signature(); ++s) {
      if (emission_[index(s, static_cast<TokenId>(j))] >
          emission_[index(best, static_cast<TokenId>(j))]) {
        best = s;
      }
    }
    codes_[j] = best;
  }
}

AsrChannelModel AsrChannelModel::identity(VocabPtr text_vocab, VocabPtr speech_vocab,
                                          int frame_rate, double smoothing_eps,
                                          SeededRng& rng) {
  return confusable(std::move(text_vocab), std::move(speech_vocab), frame_rate,
                    smoothing_eps, -1.0, rng);
}

AsrChannelModel AsrChannelModel::confusable(VocabPtr text_vocab, VocabPtr speech_vocab,
                                            int frame_rate, double smoothing_eps,
                                            double noise, SeededRng& rng) {
  // noise < 0 is the internal marker for the identity construction.
  const bool is_identity = noise < 0.0;
  if (!is_identity && !(noise <= 1.0)) throw ConfigError("channel noise must lie in [0, 1]");
  if (!text_vocab || !speech_vocab) throw UsageError("channel needs both vocabularies");
  if (frame_rate < 1) throw ConfigError("channel frame rate must be positive");
  check_eps(smoothing_eps, text_vocab->size());
  const int content = speech_vocab->content_size();
  const int nsig = checked_signature_count(content, frame_rate);
  const int pad = nsig - 1;
  const int text_content = text_vocab->content_size();
  const auto vt = static_cast<std::size_t>(text_vocab->size());
  const std::vector<int> codes = draw_codes(text_content, pad, rng);

  auto digits = [&](int s) {
    std::vector<int> d(static_cast<std::size_t>(frame_rate));
    for (int i = frame_rate - 1; i >= 0; --i) {
      d[static_cast<std::size_t>(i)] = s % content;
      s /= content;
    }
    return d;
  };
  std::vector<std::vector<int>> code_digits;
  for (int c : codes) code_digits.push_back(digits(c));

  std::vector<double> emission(static_cast<std::size_t>(nsig) * vt, 0.0);
  for (int s = 0; s < nsig; ++s) {
    std::span<double> r(emission.data() + static_cast<std::size_t>(s) * vt, vt);
    if (s == pad) {
      std::fill(r.begin(), r.end(), 1.0 / static_cast<double>(vt));
    } else if (is_identity) {
      const auto it = std::find(codes.begin(), codes.end(), s);
      if (it != codes.end()) {
        r[static_cast<std::size_t>(it - codes.begin())] = 1.0;
      } else {
        std::fill(r.begin(), r.end(), 1.0 / static_cast<double>(vt));
      }
    } else {
      const auto sd = digits(s);
      double total = 0.0;
      for (int j = 0; j < text_content; ++j) {
        int match = 0;
        for (int i = 0; i < frame_rate; ++i) {
          match += sd[static_cast<std::size_t>(i)] ==
                   code_digits[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        }
        r[static_cast<std::size_t>(j)] = std::exp(2.0 * match);
        total += r[static_cast<std::size_t>(j)];
      }
      for (double& p : r) {
        p = (1.0 - noise) * p / total + noise / static_cast<double>(vt);
      }
    }
    apply_floor(r, smoothing_eps);
  }
  return AsrChannelModel(std::move(text_vocab), std::move(speech_vocab), frame_rate,
                         smoothing_eps, std::move(emission));
}

std::size_t AsrChannelModel::index(int signature, TokenId text) const {
  return static_cast<std::size_t>(signature) * static_cast<std::size_t>(text_vocab_->size()) +
         static_cast<std::size_t>(text);
}

int AsrChannelModel::signature_of(std::span<const TokenId> frame_tokens) const {
  if (frame_tokens.size() != static_cast<std::size_t>(frame_rate_)) return pad_signature();
  const int content = speech_vocab_->content_size();
  int s = 0;
  for (TokenId t : frame_tokens) {
    if (!speech_vocab_->is_content(t)) return pad_signature();
    s = s * content + t;
  }
  return s;
}

std::vector<TokenId> AsrChannelModel::signature_tokens(int signature) const {
  if (signature < 0 || signature >= pad_signature()) {
    throw UsageError("signature " + std::to_string(signature) + " has no token form");
  }
  const int content = speech_vocab_->content_size();
  std::vector<TokenId> out(static_cast<std::size_t>(frame_rate_));
  for (int i = frame_rate_ - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = signature % content;
    signature /= content;
  }
  return out;
}

std::span<const double> AsrChannelModel::row(int signature) const {
  if (signature < 0 || signature >= num_signatures_) {
    throw UsageError("signature index out of range");
  }
  return {emission_.data() + index(signature, 0), static_cast<std::size_t>(text_vocab_->size())};
}

double AsrChannelModel::prob(int signature, TokenId text) const {
  return emission_[index(signature, text)];
}

double AsrChannelModel::log_prob(int signature, TokenId text) const {
  return log_emission_[index(signature, text)];
}

int AsrChannelModel::code_signature(TokenId text) const {
  if (!text_vocab_->contains(text)) throw UsageError("text token outside vocabulary");
  return codes_[static_cast<std::size_t>(text)];
}

TokenSequence AsrChannelModel::encode(const TokenSequence& text) const {
  if (!same_vocabulary(text.vocab(), text_vocab_)) {
    throw UsageError("encode: text is not over the channel's text vocabulary");
  }
  std::vector<TokenId> out;
  out.reserve(text.size() * static_cast<std::size_t>(frame_rate_));
  for (TokenId t : text.tokens()) {
    const auto code = signature_tokens(code_signature(t));
    out.insert(out.end(), code.begin(), code.end());
  }
  return TokenSequence(speech_vocab_, std::move(out));
}

AsrChannelModel AsrChannelModel::with_row(int signature, std::vector<double> new_row) const {
  if (new_row.size() != static_cast<std::size_t>(text_vocab_->size())) {
    throw UsageError("replacement row has the wrong width");
  }
  auto emission = emission_;
  std::copy(new_row.begin(), new_row.end(),
            emission.begin() + static_cast<std::ptrdiff_t>(index(signature, 0)));
  return AsrChannelModel(text_vocab_, speech_vocab_, frame_rate_, eps_, std::move(emission));
}

TokenSequence transcribe(const AsrChannelModel& model, const TokenSequence& speech) {
  if (!same_vocabulary(speech.vocab(), model.speech_vocab())) {
    throw UsageError("transcribe: speech is not over the channel's speech vocabulary");
  }
  std::vector<TokenId> out;
  for (const Frame& f : frames(speech, model.frame_rate())) {
    out.push_back(model.decode(model.signature_of(f)));
  }
  return TokenSequence(model.text_vocab(), std::move(out));
}

AsrScore teacher_forced_nll(const AsrChannelModel& model, const TokenSequence& speech,
                            const TokenSequence& truth) {
  if (truth.empty()) throw UndefinedMetricError("NLL of an empty ground truth");
  if (!same_vocabulary(truth.vocab(), model.text_vocab())) {
    throw UsageError("teacher_forced_nll: truth is not over the channel's text vocabulary");
  }
  AsrScore score{transcribe(model, speech)};
  const auto fs = frames(speech, model.frame_rate());
  double total = 0.0;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    const int sig = n < fs.size() ? model.signature_of(fs[n]) : model.pad_signature();
    total -= model.log_prob(sig, truth[n]);
  }
  score.nll_total = total;
  score.n_tokens = truth.size();
  score.nll_per_token = total / static_cast<double>(truth.size());
  return score;
}

void write_channel(const std::filesystem::path& path, const AsrChannelModel& model) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", model.smoothing_eps());
  out << "k=" << model.frame_rate() << " vtext=" << model.text_vocab()->size()
      << " vspeech=" << model.speech_vocab()->size() << " eps=" << buf << '\n';
  for (int s = 0; s < model.num_signatures(); ++s) {
    const auto r = model.row(s);
    for (std::size_t j = 0; j < r.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r[j]);
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

AsrChannelModel read_channel(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string header;
  if (!std::getline(in, header)) throw FormatError(path.string() + ": empty channel file");
  int k = 0, vtext = 0, vspeech = 0;
  double eps = 0.0;
  if (std::sscanf(header.c_str(), "k=%d vtext=%d vspeech=%d eps=%lf", &k, &vtext, &vspeech,
                  &eps) != 4) {
    throw FormatError(path.string() + ": bad channel header '" + header + "'");
  }
  std::vector<double> emission;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) {
      throw FormatError(path.string() + ": bad probability '" + tok + "'");
    }
    emission.push_back(v);
  }
  try {
    return AsrChannelModel(Vocabulary::with_eos("text", vtext),
                           Vocabulary::with_eos("speech", vspeech), k, eps,
                           std::move(emission));
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace asr_grpo

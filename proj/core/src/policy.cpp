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

#include "asr_grpo/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "asr_grpo/error.hpp"
#include "asr_grpo/grpo_math.hpp"
#include "asr_grpo/optim.hpp"

namespace asr_grpo {

std::size_t PolicyShape::param_count() const {
  const auto h = static_cast<std::size_t>(hidden);
  const auto vt = static_cast<std::size_t>(text_vocab);
  const auto vs = static_cast<std::size_t>(speech_vocab);
  const auto k = static_cast<std::size_t>(frame_rate);
  return vt * h + k * h + (vs + 1) * h + 2 * h + vs * h + vs;
}

PolicyModel::PolicyModel(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate,
                         int hidden, int max_len)
    : text_vocab_(std::move(text_vocab)), speech_vocab_(std::move(speech_vocab)) {
  if (!text_vocab_ || !speech_vocab_) throw UsageError("policy needs both vocabularies");
  if (frame_rate < 1) throw ConfigError("policy frame rate must be positive");
  if (hidden < 1) throw ConfigError("policy hidden size must be positive");
  if (max_len < 1) throw ConfigError("policy max_len must be positive");
  shape_ = {text_vocab_->size(), speech_vocab_->size(), frame_rate, hidden, max_len};
  const auto h = static_cast<std::size_t>(hidden);
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  layout_.text_embed = take(static_cast<std::size_t>(shape_.text_vocab) * h);
  layout_.offset_embed = take(static_cast<std::size_t>(frame_rate) * h);
  layout_.prev_embed = take(static_cast<std::size_t>(shape_.speech_vocab + 1) * h);
  layout_.hidden_bias = take(h);
  layout_.recur = take(h);
  layout_.out_weight = take(static_cast<std::size_t>(shape_.speech_vocab) * h);
  layout_.out_bias = take(static_cast<std::size_t>(shape_.speech_vocab));
  layout_.total = at;
  params_.assign(at, 0.0);
}

PolicyModel PolicyModel::initialize(VocabPtr text_vocab, VocabPtr speech_vocab, int frame_rate,
                                    int hidden, int max_len, double embed_scale,
                                    SeededRng& rng) {
  PolicyModel m(std::move(text_vocab), std::move(speech_vocab), frame_rate, hidden, max_len);
  auto p = m.params();
  for (std::size_t i = 0; i < m.layout_.recur; ++i) p[i] = embed_scale * rng.normal();
  return m;
}

TokenSequence Rollout::speech() const {
  auto tokens = output.tokens();
  if (terminated && !tokens.empty()) tokens.pop_back();
  return TokenSequence(output.vocab(), std::move(tokens));
}

namespace {

// Fixed-order blocked dot product: eight partial sums, combined pairwise, so
// results are identical across runs and the loop vectorizes.
double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[j + l] * b[j + l];
  }
  for (; j < n; ++j) acc[j % 8] += a[j] * b[j];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

// Evaluates the network along one output sequence, keeping every hidden
// state and log-softmax row for the backward pass.
class Unroll {
 public:
  Unroll(const PolicyModel& model, const TokenSequence& prompt)
      : m_(model), prompt_(prompt), h_(static_cast<std::size_t>(model.shape().hidden)) {
    if (!same_vocabulary(prompt.vocab(), model.text_vocab())) {
      throw UsageError("policy: prompt is not over the policy's text vocabulary");
    }
    const auto steps = static_cast<std::size_t>(model.shape().max_len) + 1;
    hidden_.reserve(steps * h_);
    logp_.reserve(steps * static_cast<std::size_t>(model.shape().speech_vocab));
  }

  std::size_t steps() const { return hidden_.size() / h_; }
  std::span<const double> hidden(std::size_t t) const { return {hidden_.data() + t * h_, h_}; }
  std::span<const double> logp(std::size_t t) const {
    const auto vs = static_cast<std::size_t>(m_.shape().speech_vocab);
    return {logp_.data() + t * vs, vs};
  }

  TokenId aligned_text(std::size_t t) const {
    const auto a = t / static_cast<std::size_t>(m_.shape().frame_rate);
    return a < prompt_.size() ? prompt_[a] : m_.text_vocab()->eos();
  }

  // Advances one step given the previous output token (-1 at the start) and
  // returns the new log-softmax row.
  std::span<const double> advance(TokenId prev) {
    const auto& L = m_.layout();
    const auto p = m_.params();
    const std::size_t t = steps();
    const auto k = static_cast<std::size_t>(m_.shape().frame_rate);
    const auto vs = static_cast<std::size_t>(m_.shape().speech_vocab);
    const std::size_t prev_row = prev < 0 ? vs : static_cast<std::size_t>(prev);
    const double* te = p.data() + L.text_embed + static_cast<std::size_t>(aligned_text(t)) * h_;
    const double* oe = p.data() + L.offset_embed + (t % k) * h_;
    const double* pe = p.data() + L.prev_embed + prev_row * h_;
    const double* hb = p.data() + L.hidden_bias;
    const double* rc = p.data() + L.recur;
    hidden_.resize(hidden_.size() + h_);
    const double* hp = t ? hidden_.data() + (t - 1) * h_ : nullptr;
    double* h = hidden_.data() + t * h_;
    for (std::size_t j = 0; j < h_; ++j) {
      double pre = te[j] + oe[j] + pe[j] + hb[j];
      if (hp) pre += rc[j] * hp[j];
      h[j] = std::tanh(pre);
    }
    logp_.resize(logp_.size() + vs);
    double* row = logp_.data() + t * vs;
    const double* w = p.data() + L.out_weight;
    const double* ob = p.data() + L.out_bias;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < vs; ++v) {
      const double* wv = w + v * h_;
      const double z = ob[v] + dot(wv, h, h_);
      row[v] = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < vs; ++v) sum += std::exp(row[v] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t v = 0; v < vs; ++v) row[v] -= lse;
    return {row, vs};
  }

  // Backward pass: gradient += sum_t coeff[t] * d log p_t(outputs[t]).
  void backward(std::span<const TokenId> outputs, std::span<const double> coeff,
                std::span<double> grad) const {
    const auto& L = m_.layout();
    const auto p = m_.params();
    const auto k = static_cast<std::size_t>(m_.shape().frame_rate);
    const auto vs = static_cast<std::size_t>(m_.shape().speech_vocab);
    std::vector<double> dh_next(h_, 0.0), dh(h_), dlogits(vs);
    for (std::size_t t = steps(); t-- > 0;) {
      const auto row = logp(t);
      const auto h = hidden(t);
      for (std::size_t v = 0; v < vs; ++v) {
        dlogits[v] = coeff[t] * ((static_cast<TokenId>(v) == outputs[t] ? 1.0 : 0.0) -
                                 std::exp(row[v]));
      }
      dh = dh_next;
      for (std::size_t v = 0; v < vs; ++v) {
        const double d = dlogits[v];
        if (d == 0.0) continue;
        grad[L.out_bias + v] += d;
        double* gw = grad.data() + L.out_weight + v * h_;
        const double* wv = p.data() + L.out_weight + v * h_;
        for (std::size_t j = 0; j < h_; ++j) {
          gw[j] += d * h[j];
          dh[j] += d * wv[j];
        }
      }
      const std::size_t prev_row = t == 0 ? vs : static_cast<std::size_t>(outputs[t - 1]);
      double* gt = grad.data() + L.text_embed + static_cast<std::size_t>(aligned_text(t)) * h_;
      double* go = grad.data() + L.offset_embed + (t % k) * h_;
      double* gp = grad.data() + L.prev_embed + prev_row * h_;
      double* gb = grad.data() + L.hidden_bias;
      double* gr = grad.data() + L.recur;
      const double* rc = p.data() + L.recur;
      const double* hp = t ? hidden_.data() + (t - 1) * h_ : nullptr;
      for (std::size_t j = 0; j < h_; ++j) {
        const double dpre = dh[j] * (1.0 - h[j] * h[j]);
        gt[j] += dpre;
        go[j] += dpre;
        gp[j] += dpre;
        gb[j] += dpre;
        if (hp) gr[j] += dpre * hp[j];
        dh_next[j] = dpre * rc[j];
      }
    }
  }

 private:
  const PolicyModel& m_;
  const TokenSequence& prompt_;
  std::size_t h_;
  std::vector<double> hidden_;
  std::vector<double> logp_;
};

void check_output(const PolicyModel& model, const TokenSequence& output) {
  if (!same_vocabulary(output.vocab(), model.speech_vocab())) {
    throw UsageError("policy: output is not over the policy's speech vocabulary");
  }
}

TokenId argmax_lowest(std::span<const double> row) {
  return static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

Rollout sample(const PolicyModel& model, const TokenSequence& prompt,
               const SampleOptions& options, SeededRng& rng) {
  if (!options.greedy && !(options.temperature > 0.0)) {
    throw UsageError("sample: temperature must be positive");
  }
  Unroll un(model, prompt);
  const auto eos = model.speech_vocab()->eos();
  const auto vs = static_cast<std::size_t>(model.shape().speech_vocab);
  std::vector<TokenId> out;
  Rollout r;
  std::vector<double> tempered(vs);
  TokenId prev = -1;
  for (int t = 0; t < model.shape().max_len; ++t) {
    const auto row = un.advance(prev);
    TokenId choice = 0;
    double logp_sampling = 0.0;
    if (options.greedy) {
      choice = argmax_lowest(row);
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < vs; ++v) {
        tempered[v] = row[v] / options.temperature;
        mx = std::max(mx, tempered[v]);
      }
      double sum = 0.0;
      for (std::size_t v = 0; v < vs; ++v) sum += std::exp(tempered[v] - mx);
      const double lse = mx + std::log(sum);
      const double u = rng.uniform01();
      double cum = 0.0;
      choice = -1;
      for (std::size_t v = 0; v < vs; ++v) {
        tempered[v] -= lse;
        const double pv = std::exp(tempered[v]);
        cum += pv;
        if (choice < 0 && u < cum) choice = static_cast<TokenId>(v);
      }
      if (choice < 0) {
        // u landed in the rounding gap above the final cumulative sum.
        choice = static_cast<TokenId>(vs - 1);
        while (choice > 0 && tempered[static_cast<std::size_t>(choice)] ==
                                 -std::numeric_limits<double>::infinity()) {
          --choice;
        }
      }
      logp_sampling = tempered[static_cast<std::size_t>(choice)];
    }
    out.push_back(choice);
    r.logp_current.push_back(row[static_cast<std::size_t>(choice)]);
    r.logp_sampling.push_back(logp_sampling);
    prev = choice;
    if (choice == eos) {
      r.terminated = true;
      break;
    }
  }
  r.prompt = prompt;
  r.output = TokenSequence(model.speech_vocab(), std::move(out));
  r.logp_old = r.logp_current;
  return r;
}

std::vector<double> log_prob(const PolicyModel& model, const TokenSequence& prompt,
                             const TokenSequence& output) {
  check_output(model, output);
  Unroll un(model, prompt);
  std::vector<double> out;
  out.reserve(output.size());
  TokenId prev = -1;
  for (TokenId tok : output.tokens()) {
    out.push_back(un.advance(prev)[static_cast<std::size_t>(tok)]);
    prev = tok;
  }
  return out;
}

std::vector<double> next_token_log_probs(const PolicyModel& model, const TokenSequence& prompt,
                                         std::span<const TokenId> prefix) {
  Unroll un(model, prompt);
  TokenId prev = -1;
  for (TokenId tok : prefix) {
    if (!model.speech_vocab()->contains(tok)) throw UsageError("prefix token out of range");
    un.advance(prev);
    prev = tok;
  }
  const auto row = un.advance(prev);
  return {row.begin(), row.end()};
}

void accumulate_log_prob_gradient(const PolicyModel& model, const TokenSequence& prompt,
                                  const TokenSequence& output, std::span<const double> coeff,
                                  std::span<double> gradient) {
  check_output(model, output);
  if (coeff.size() != output.size()) throw UsageError("one coefficient per output token");
  if (gradient.size() != model.params().size()) throw UsageError("gradient size mismatch");
  Unroll un(model, prompt);
  TokenId prev = -1;
  for (TokenId tok : output.tokens()) {
    un.advance(prev);
    prev = tok;
  }
  un.backward(output.tokens(), coeff, gradient);
}

ObjectiveResult objective_gradient(const PolicyModel& model, std::span<const Rollout> rollouts,
                                   std::span<const double> advantages,
                                   const ObjectiveOptions& options) {
  if (rollouts.size() < 2) throw ConfigError("objective needs a group of at least 2 rollouts");
  if (advantages.size() != rollouts.size()) {
    throw UsageError("objective: one advantage per rollout required");
  }
  const double G = static_cast<double>(rollouts.size());
  ObjectiveResult res;
  res.gradient.assign(model.params().size(), 0.0);
  double kl_sum = 0.0;
  std::size_t kl_count = 0;
  std::vector<double> coeff;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const Rollout& ro = rollouts[i];
    const std::size_t T = ro.output.size();
    if (T == 0) continue;
    if (ro.logp_old.size() != T || ro.logp_ref.size() != T) {
      throw UsageError("objective: rollout log-prob lists must match the output length");
    }
    check_output(model, ro.output);
    Unroll un(model, ro.prompt);
    const double A = advantages[i];
    const double scale = 1.0 / (G * static_cast<double>(T));
    coeff.assign(T, 0.0);
    TokenId prev = -1;
    for (std::size_t t = 0; t < T; ++t) {
      const TokenId tok = ro.output[t];
      const double lc = un.advance(prev)[static_cast<std::size_t>(tok)];
      prev = tok;
      const double ratio = std::exp(lc - ro.logp_old[t]);
      double surrogate = ratio * A;
      double dsurrogate = ratio * A;  // d(ratio * A) / d log pi
      if (options.clip_epsilon > 0.0) {
        const double clipped =
            std::clamp(ratio, 1.0 - options.clip_epsilon, 1.0 + options.clip_epsilon) * A;
        if (clipped < surrogate) {
          surrogate = clipped;
          dsurrogate = 0.0;
        }
      }
      const double kl = kl_per_token(ro.logp_ref[t], lc);
      const double r = std::exp(ro.logp_ref[t] - lc);
      res.value += scale * (surrogate - options.beta * kl);
      coeff[t] = scale * (dsurrogate - options.beta * (1.0 - r));
      kl_sum += kl;
      ++kl_count;
    }
    un.backward(ro.output.tokens(), coeff, res.gradient);
  }
  res.mean_kl = kl_count ? kl_sum / static_cast<double>(kl_count) : 0.0;
  return res;
}

namespace {

std::vector<TokenId> pick_decoys(int content, int count, SeededRng& rng) {
  std::vector<TokenId> pool(static_cast<std::size_t>(content));
  std::iota(pool.begin(), pool.end(), 0);
  count = std::min(count, content);
  for (int i = 0; i < count; ++i) {
    const auto j =
        i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(content - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

PolicyModel pretrain_supervised(const PolicyModel& model, const PromptCorpus& corpus,
                                const AsrChannelModel& channel, const PretrainConfig& config,
                                SeededRng& rng) {
  if (config.steps < 0) throw ConfigError("pretrain steps must be >= 0");
  PolicyModel out = model;
  if (config.steps == 0) return out;
  if (config.batch < 1) throw ConfigError("pretrain batch must be >= 1");
  if (!(config.decoy_prob >= 0.0 && config.decoy_prob <= 1.0) ||
      !(config.label_noise >= 0.0 && config.label_noise <= 1.0)) {
    throw ConfigError("pretrain noise probabilities must lie in [0, 1]");
  }
  if (!same_vocabulary(corpus.vocab(), model.text_vocab()) ||
      !same_vocabulary(channel.speech_vocab(), model.speech_vocab())) {
    throw UsageError("pretrain: corpus, channel and policy vocabularies disagree");
  }
  if (channel.frame_rate() != model.shape().frame_rate) {
    throw ConfigError("pretrain: channel and policy frame rates differ");
  }
  const auto train = corpus.indices(Split::kTrain);
  if (train.empty()) throw ConfigError("pretrain: corpus has no train entries");

  const int text_content = corpus.vocab()->content_size();
  const auto decoys = pick_decoys(text_content, config.decoy_tokens, rng);
  const auto signatures = static_cast<std::uint64_t>(channel.pad_signature());

  Optimizer opt(OptimizerKind::kAdam, config.learning_rate, out.params().size());
  std::vector<double> grad(out.params().size());
  for (int step = 0; step < config.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<std::pair<std::size_t, TokenSequence>> batch;
    std::size_t total = 0;
    for (int b = 0; b < config.batch; ++b) {
      const std::size_t idx = train[rng.uniform_index(train.size())];
      const auto& prompt = corpus[idx];
      std::vector<TokenId> target;
      for (TokenId y : prompt.tokens()) {
        int sig = channel.code_signature(y);
        const bool is_decoy = std::find(decoys.begin(), decoys.end(), y) != decoys.end();
        const double u = rng.uniform01();
        if (is_decoy) {
          if (u < config.decoy_prob) {
            sig = channel.code_signature(static_cast<TokenId>((y + 1) % text_content));
          }
        } else if (u < config.label_noise) {
          sig = static_cast<int>(rng.uniform_index(signatures));
        }
        const auto code = channel.signature_tokens(sig);
        target.insert(target.end(), code.begin(), code.end());
      }
      target.push_back(out.speech_vocab()->eos());
      if (static_cast<int>(target.size()) > out.shape().max_len) {
        target.resize(static_cast<std::size_t>(out.shape().max_len));
      }
      total += target.size();
      batch.emplace_back(idx, TokenSequence(out.speech_vocab(), std::move(target)));
    }
    for (const auto& [idx, target] : batch) {
      std::vector<double> coeff(target.size(), 1.0 / static_cast<double>(total));
      accumulate_log_prob_gradient(out, corpus[idx], target, coeff, grad);
    }
    opt.ascend(out.params(), grad);
  }
  return out;
}

std::string checkpoint_bytes(const PolicyModel& model) {
  const auto& s = model.shape();
  char header[256];
  std::snprintf(header, sizeof header,
                "asr_grpo_policy v1 text_vocab=%d speech_vocab=%d frame_rate=%d hidden=%d "
                "max_len=%d params=%zu\n",
                s.text_vocab, s.speech_vocab, s.frame_rate, s.hidden, s.max_len,
                model.params().size());
  std::string out(header);
  const auto p = model.params();
  const std::size_t start = out.size();
  out.resize(start + p.size() * sizeof(double));
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(p[i]);
    for (int b = 0; b < 8; ++b) {
      out[start + i * 8 + static_cast<std::size_t>(b)] = static_cast<char>(bits & 0xFF);
      bits >>= 8;
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model) {
  write_file_atomic(path, checkpoint_bytes(model));
}

PolicyModel load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw FormatError(path.string() + ": missing checkpoint header");
  const std::string header = data.substr(0, nl);
  int vt = 0, vs = 0, k = 0, hidden = 0, max_len = 0;
  std::size_t n = 0;
  if (std::sscanf(header.c_str(),
                  "asr_grpo_policy v1 text_vocab=%d speech_vocab=%d frame_rate=%d hidden=%d "
                  "max_len=%d params=%zu",
                  &vt, &vs, &k, &hidden, &max_len, &n) != 6) {
    throw FormatError(path.string() + ": bad checkpoint header '" + header + "'");
  }
  PolicyModel model = [&] {
    try {
      return PolicyModel(Vocabulary::with_eos("text", vt), Vocabulary::with_eos("speech", vs),
                         k, hidden, max_len);
    } catch (const ConfigError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }();
  if (model.params().size() != n || data.size() != nl + 1 + n * sizeof(double)) {
    throw FormatError(path.string() + ": parameter block does not match the header");
  }
  auto p = model.params();
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data() + nl + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    p[i] = std::bit_cast<double>(bits);
  }
  return model;
}

std::uint64_t parameter_hash(const PolicyModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : model.params()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= bits & 0xFF;
      h *= 0x100000001b3ULL;
      bits >>= 8;
    }
  }
  return h;
}

}  // namespace asr_grpo

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

#include "asr_grpo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "asr_grpo/editdist.hpp"
#include "asr_grpo/error.hpp"
#include "json.hpp"

namespace asr_grpo {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

DecodeMode parse_decode(const std::string& s) {
  if (s == "greedy") return DecodeMode::kGreedy;
  if (s == "sampled") return DecodeMode::kSampled;
  throw ConfigError("unknown decode mode '" + s + "'");
}

std::string to_string(DecodeMode d) { return d == DecodeMode::kGreedy ? "greedy" : "sampled"; }

int to_int(long long v, const char* key) {
  if (v < -2147483647LL || v > 2147483647LL) {
    throw ConfigError(std::string("config key '") + key + "' out of range");
  }
  return static_cast<int>(v);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "corpus.seed", "corpus.text_vocab", "corpus.speech_vocab", "corpus.min_len",
      "corpus.max_len", "corpus.train_count", "corpus.heldout_count",
      "channel.kind", "channel.frame_rate", "channel.noise", "channel.eps", "channel.seed",
      "policy.hidden", "policy.max_len", "policy.embed_scale", "policy.seed",
      "pretrain.steps", "pretrain.batch", "pretrain.learning_rate", "pretrain.decoy_tokens",
      "pretrain.decoy_prob", "pretrain.label_noise", "pretrain.seed",
      "reward.alpha_c", "reward.alpha_n", "reward.lambda_c", "reward.lambda_n",
      "reward.mode", "reward.nll_normalization",
      "grpo.group_size", "grpo.beta", "grpo.learning_rate", "grpo.updates",
      "grpo.batch_prompts", "grpo.inner_epochs", "grpo.std_epsilon", "grpo.optimizer",
      "grpo.clip_epsilon", "grpo.temperature", "grpo.kl_ceiling", "grpo.seed",
      "eval.every", "eval.decode", "eval.temperature", "eval.seed",
      "experiment.modes", "experiment.correlation_min_len", "experiment.checkpoint_every",
      "log.detail", "log.wall_time"};
  return keys;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  grpo.group_size = 8;
  grpo.beta = 0.1;
  grpo.learning_rate = 1e-5;
  grpo.updates = 200;
  grpo.batch_prompts = 16;
  grpo.inner_epochs = 4;
  grpo.optimizer = OptimizerKind::kAdam;
  grpo.seed = 23;
}

int ExperimentConfig::policy_max_len() const {
  return policy.max_len > 0 ? policy.max_len : channel.frame_rate * corpus.max_len + 2;
}

void ExperimentConfig::validate() const {
  if (corpus.train_count < 1) throw ConfigError("corpus.train_count must be >= 1");
  if (corpus.heldout_count < 0) throw ConfigError("corpus.heldout_count must be >= 0");
  if (channel.kind != "identity" && channel.kind != "confusable") {
    throw ConfigError("channel.kind must be identity or confusable");
  }
  if (modes.empty()) throw ConfigError("experiment.modes is empty");
  if (eval.every < 0 || checkpoint_every < 0) {
    throw ConfigError("eval.every and experiment.checkpoint_every must be >= 0");
  }
  if (!(eval.temperature > 0.0)) throw ConfigError("eval.temperature must be positive");
  if (correlation_min_len < 0) throw ConfigError("experiment.correlation_min_len must be >= 0");
  reward.validate();
  grpo.validate();
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValueConfig& kv) {
  kv.check_known(known_keys());
  ExperimentConfig c;
  auto i = [&](const char* key, int& dst) {
    if (kv.has(key)) dst = to_int(kv.get_int(key), key);
  };
  auto d = [&](const char* key, double& dst) {
    if (kv.has(key)) dst = kv.get_double(key);
  };
  auto u = [&](const char* key, std::uint64_t& dst) {
    if (kv.has(key)) dst = kv.get_u64(key);
  };
  u("corpus.seed", c.corpus.seed);
  i("corpus.text_vocab", c.corpus.text_vocab);
  i("corpus.speech_vocab", c.corpus.speech_vocab);
  i("corpus.min_len", c.corpus.min_len);
  i("corpus.max_len", c.corpus.max_len);
  i("corpus.train_count", c.corpus.train_count);
  i("corpus.heldout_count", c.corpus.heldout_count);
  if (kv.has("channel.kind")) c.channel.kind = kv.get_string("channel.kind");
  i("channel.frame_rate", c.channel.frame_rate);
  d("channel.noise", c.channel.noise);
  d("channel.eps", c.channel.eps);
  u("channel.seed", c.channel.seed);
  i("policy.hidden", c.policy.hidden);
  i("policy.max_len", c.policy.max_len);
  d("policy.embed_scale", c.policy.embed_scale);
  u("policy.seed", c.policy.seed);
  i("pretrain.steps", c.pretrain.steps);
  i("pretrain.batch", c.pretrain.batch);
  d("pretrain.learning_rate", c.pretrain.learning_rate);
  i("pretrain.decoy_tokens", c.pretrain.decoy_tokens);
  d("pretrain.decoy_prob", c.pretrain.decoy_prob);
  d("pretrain.label_noise", c.pretrain.label_noise);
  u("pretrain.seed", c.pretrain_seed);
  d("reward.alpha_c", c.reward.alpha_c);
  d("reward.alpha_n", c.reward.alpha_n);
  d("reward.lambda_c", c.reward.lambda_c);
  d("reward.lambda_n", c.reward.lambda_n);
  if (kv.has("reward.mode")) c.reward.mode = parse_reward_mode(kv.get_string("reward.mode"));
  if (kv.has("reward.nll_normalization")) {
    c.reward.nll_normalization =
        parse_nll_normalization(kv.get_string("reward.nll_normalization"));
  }
  i("grpo.group_size", c.grpo.group_size);
  d("grpo.beta", c.grpo.beta);
  d("grpo.learning_rate", c.grpo.learning_rate);
  i("grpo.updates", c.grpo.updates);
  i("grpo.batch_prompts", c.grpo.batch_prompts);
  i("grpo.inner_epochs", c.grpo.inner_epochs);
  d("grpo.std_epsilon", c.grpo.std_epsilon);
  if (kv.has("grpo.optimizer")) c.grpo.optimizer = parse_optimizer(kv.get_string("grpo.optimizer"));
  d("grpo.clip_epsilon", c.grpo.clip_epsilon);
  d("grpo.temperature", c.grpo.temperature);
  d("grpo.kl_ceiling", c.grpo.kl_ceiling);
  u("grpo.seed", c.grpo.seed);
  i("eval.every", c.eval.every);
  if (kv.has("eval.decode")) c.eval.decode = parse_decode(kv.get_string("eval.decode"));
  d("eval.temperature", c.eval.temperature);
  u("eval.seed", c.eval.seed);
  if (kv.has("experiment.modes")) {
    c.modes.clear();
    for (const auto& m : split_on(kv.get_string("experiment.modes"), ',')) {
      const std::string t = trim_ws(m);
      if (!t.empty()) c.modes.push_back(parse_reward_mode(t));
    }
  }
  i("experiment.correlation_min_len", c.correlation_min_len);
  i("experiment.checkpoint_every", c.checkpoint_every);
  if (kv.has("log.detail")) c.log_detail = kv.get_bool("log.detail");
  if (kv.has("log.wall_time")) c.log_wall_time = kv.get_bool("log.wall_time");
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from_key_values(KeyValueConfig::load(path));
}

KeyValueConfig ExperimentConfig::to_key_values() const {
  KeyValueConfig kv;
  auto i = [&](const char* key, long long v) { kv.set(key, std::to_string(v)); };
  auto d = [&](const char* key, double v) { kv.set(key, fmt_double(v)); };
  auto u = [&](const char* key, std::uint64_t v) { kv.set(key, std::to_string(v)); };
  u("corpus.seed", corpus.seed);
  i("corpus.text_vocab", corpus.text_vocab);
  i("corpus.speech_vocab", corpus.speech_vocab);
  i("corpus.min_len", corpus.min_len);
  i("corpus.max_len", corpus.max_len);
  i("corpus.train_count", corpus.train_count);
  i("corpus.heldout_count", corpus.heldout_count);
  kv.set("channel.kind", channel.kind);
  i("channel.frame_rate", channel.frame_rate);
  d("channel.noise", channel.noise);
  d("channel.eps", channel.eps);
  u("channel.seed", channel.seed);
  i("policy.hidden", policy.hidden);
  i("policy.max_len", policy.max_len);
  d("policy.embed_scale", policy.embed_scale);
  u("policy.seed", policy.seed);
  i("pretrain.steps", pretrain.steps);
  i("pretrain.batch", pretrain.batch);
  d("pretrain.learning_rate", pretrain.learning_rate);
  i("pretrain.decoy_tokens", pretrain.decoy_tokens);
  d("pretrain.decoy_prob", pretrain.decoy_prob);
  d("pretrain.label_noise", pretrain.label_noise);
  u("pretrain.seed", pretrain_seed);
  d("reward.alpha_c", reward.alpha_c);
  d("reward.alpha_n", reward.alpha_n);
  d("reward.lambda_c", reward.lambda_c);
  d("reward.lambda_n", reward.lambda_n);
  kv.set("reward.mode", to_string(reward.mode));
  kv.set("reward.nll_normalization", to_string(reward.nll_normalization));
  i("grpo.group_size", grpo.group_size);
  d("grpo.beta", grpo.beta);
  d("grpo.learning_rate", grpo.learning_rate);
  i("grpo.updates", grpo.updates);
  i("grpo.batch_prompts", grpo.batch_prompts);
  i("grpo.inner_epochs", grpo.inner_epochs);
  d("grpo.std_epsilon", grpo.std_epsilon);
  kv.set("grpo.optimizer", to_string(grpo.optimizer));
  d("grpo.clip_epsilon", grpo.clip_epsilon);
  d("grpo.temperature", grpo.temperature);
  d("grpo.kl_ceiling", grpo.kl_ceiling);
  u("grpo.seed", grpo.seed);
  i("eval.every", eval.every);
  kv.set("eval.decode", to_string(eval.decode));
  d("eval.temperature", eval.temperature);
  u("eval.seed", eval.seed);
  std::string ms;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (k) ms += ",";
    ms += to_string(modes[k]);
  }
  kv.set("experiment.modes", ms);
  i("experiment.correlation_min_len", correlation_min_len);
  i("experiment.checkpoint_every", checkpoint_every);
  kv.set("log.detail", log_detail ? "true" : "false");
  kv.set("log.wall_time", log_wall_time ? "true" : "false");
  return kv;
}

VocabPtr make_text_vocab(const ExperimentConfig& config) {
  return Vocabulary::with_eos("text", config.corpus.text_vocab);
}

VocabPtr make_speech_vocab(const ExperimentConfig& config) {
  return Vocabulary::with_eos("speech", config.corpus.speech_vocab);
}

PromptCorpus make_corpus(const ExperimentConfig& config) {
  SeededRng rng(config.corpus.seed);
  return generate_corpus(rng, config.corpus.train_count + config.corpus.heldout_count,
                         config.corpus.min_len, config.corpus.max_len, make_text_vocab(config),
                         config.corpus.heldout_count);
}

AsrChannelModel make_channel(const ExperimentConfig& config) {
  SeededRng rng(config.channel.seed);
  const auto& p = config.channel;
  if (p.kind == "identity") {
    return AsrChannelModel::identity(make_text_vocab(config), make_speech_vocab(config),
                                     p.frame_rate, p.eps, rng);
  }
  if (p.kind == "confusable") {
    return AsrChannelModel::confusable(make_text_vocab(config), make_speech_vocab(config),
                                       p.frame_rate, p.eps, p.noise, rng);
  }
  throw ConfigError("unknown channel kind '" + p.kind + "'");
}

PolicyModel make_initial_policy(const ExperimentConfig& config) {
  SeededRng rng(config.policy.seed);
  return PolicyModel::initialize(make_text_vocab(config), make_speech_vocab(config),
                                 config.channel.frame_rate, config.policy.hidden,
                                 config.policy_max_len(), config.policy.embed_scale, rng);
}

PolicyModel make_pretrained_policy(const ExperimentConfig& config, const PromptCorpus& corpus,
                                   const AsrChannelModel& channel) {
  SeededRng rng(config.pretrain_seed);
  return pretrain_supervised(make_initial_policy(config), corpus, channel, config.pretrain, rng);
}

EvalReport summarize_rows(std::vector<EvalRow> rows) {
  if (rows.empty()) throw UndefinedMetricError("evaluation over an empty split");
  EvalReport r;
  std::vector<EditDistanceResult> ed;
  ed.reserve(rows.size());
  double nll = 0.0, reward = 0.0;
  for (const auto& row : rows) {
    ed.push_back({row.distance, row.ref_len, row.cer});
    nll += row.nll_per_token;
    reward += row.reward;
  }
  r.corpus_cer = corpus_cer(ed);
  r.mean_nll_per_token = nll / static_cast<double>(rows.size());
  r.mean_reward = reward / static_cast<double>(rows.size());
  r.rows = std::move(rows);
  return r;
}

EvalReport evaluate(const PolicyModel& model, const PromptCorpus& corpus, Split split,
                    const AsrChannelModel& channel, const RewardConfig& reward_config,
                    const EvalOptions& options) {
  const auto ids = corpus.indices(split);
  if (ids.empty()) throw UndefinedMetricError("evaluation over an empty split");
  const SeededRng root(options.seed);
  const SampleOptions sopts{options.temperature, options.decode == DecodeMode::kGreedy};
  std::vector<EvalRow> rows;
  rows.reserve(ids.size());
  for (std::size_t id : ids) {
    SeededRng rng = root.split(id);
    const Rollout ro = sample(model, corpus[id], sopts, rng);
    const RewardBreakdown b = score_rollout(reward_config, channel, corpus[id], ro.speech());
    EvalRow row;
    row.prompt_id = id;
    row.ref_len = corpus[id].size();
    row.hyp_len = b.transcript.size();
    row.distance = edit_distance(corpus[id], b.transcript);
    row.cer = b.cer;
    row.nll_total = b.nll_total;
    row.nll_per_token = b.nll_total / static_cast<double>(row.ref_len);
    row.r_cer = b.r_cer;
    row.r_nll = b.r_nll;
    row.reward = b.r_combined;
    rows.push_back(row);
  }
  return summarize_rows(std::move(rows));
}

void write_eval_csv(const fs::path& path, const EvalReport& report) {
  std::ostringstream out;
  out << "prompt_id,ref_len,hyp_len,distance,cer,nll_total,nll_per_token,r_cer,r_nll,reward\n";
  for (const auto& r : report.rows) {
    out << r.prompt_id << ',' << r.ref_len << ',' << r.hyp_len << ',' << r.distance << ','
        << fmt_double(r.cer) << ',' << fmt_double(r.nll_total) << ','
        << fmt_double(r.nll_per_token) << ',' << fmt_double(r.r_cer) << ','
        << fmt_double(r.r_nll) << ',' << fmt_double(r.reward) << '\n';
  }
  write_file_atomic(path, out.str());
}

EvalReport read_eval_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (trim_ws(line).empty()) continue;
    const auto f = split_on(line, ',');
    if (f.size() != 10) throw FormatError(path.string() + ": expected 10 columns");
    try {
      EvalRow r;
      r.prompt_id = std::stoull(f[0]);
      r.ref_len = std::stoull(f[1]);
      r.hyp_len = std::stoull(f[2]);
      r.distance = std::stoull(f[3]);
      r.cer = std::stod(f[4]);
      r.nll_total = std::stod(f[5]);
      r.nll_per_token = std::stod(f[6]);
      r.r_cer = std::stod(f[7]);
      r.r_nll = std::stod(f[8]);
      r.reward = std::stod(f[9]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
  }
  return summarize_rows(std::move(rows));
}

void write_report_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "mode,corpus_cer,mean_nll,mean_reward,step\n";
  for (const auto& r : rows) {
    out << r.mode << ',' << fmt_double(r.corpus_cer) << ',' << fmt_double(r.mean_nll) << ','
        << fmt_double(r.mean_reward) << ',' << r.step << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<ReportRow> read_report_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (trim_ws(line).empty()) continue;
    const auto f = split_on(line, ',');
    if (f.size() != 5) throw FormatError(path.string() + ": expected 5 columns");
    try {
      rows.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stoi(f[4])});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
  }
  return rows;
}

namespace {

json metrics_json(const UpdateMetrics& m, bool wall_time) {
  return json{{"step", m.step},
              {"mean_reward", m.mean_reward},
              {"mean_cer", m.mean_cer},
              {"mean_nll", m.mean_nll},
              {"mean_kl", m.mean_kl},
              {"objective", m.objective},
              {"grad_norm", m.grad_norm},
              {"wall_ms", wall_time ? m.wall_ms : 0.0}};
}

void append_detail(std::string& out, const UpdateResult& upd, const PromptCorpus& corpus) {
  for (const auto& g : upd.groups) {
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const auto& b = g.breakdowns[i];
      json j{{"step", upd.metrics.step},
             {"prompt_id", g.prompt_id},
             {"rollout", i},
             {"text_len", corpus[g.prompt_id].size()},
             {"output", g.rollouts[i].output.tokens()},
             {"terminated", g.rollouts[i].terminated},
             {"cer", b.cer},
             {"nll_used", b.nll_used},
             {"r_cer", b.r_cer},
             {"r_nll", b.r_nll},
             {"r_combined", b.r_combined},
             {"advantage", g.advantages[i]}};
      out += j.dump();
      out += '\n';
    }
  }
}

fs::path step_file(const fs::path& dir, const char* stem, int step, const char* ext) {
  return dir / (std::string(stem) + "_" + std::to_string(step) + ext);
}

}  // namespace

TrainOutcome train_mode(const ExperimentConfig& config, RewardMode mode,
                        const PolicyModel& initial, const PromptCorpus& corpus,
                        const AsrChannelModel& channel, const fs::path& out) {
  config.validate();
  RewardConfig reward = config.reward;
  reward.mode = mode;
  const bool write = !out.empty();
  if (write) fs::create_directories(out);
  const EvalOptions eopts{config.eval.decode, config.eval.temperature, config.eval.seed};

  std::string metrics_log;
  std::string detail_log;
  auto flush_logs = [&] {
    if (!write) return;
    write_file_atomic(out / "metrics.jsonl", metrics_log);
    if (config.log_detail) write_file_atomic(out / "detail.jsonl", detail_log);
  };
  if (write) {
    write_eval_csv(step_file(out, "eval", 0, ".csv"),
                   evaluate(initial, corpus, Split::kHeldOut, channel, reward, eopts));
  }

  TrainHooks hooks;
  hooks.on_update = [&](const UpdateResult& upd, const TrainState& state) {
    metrics_log += metrics_json(upd.metrics, config.log_wall_time).dump();
    metrics_log += '\n';
    if (config.log_detail) append_detail(detail_log, upd, corpus);
    const int step = upd.metrics.step;
    if (!write || step == config.grpo.updates) return;
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      save_checkpoint(step_file(out, "checkpoint", step, ".bin"), state.current);
      flush_logs();
    }
    if (config.eval.every > 0 && step % config.eval.every == 0) {
      write_eval_csv(step_file(out, "eval", step, ".csv"),
                     evaluate(state.current, corpus, Split::kHeldOut, channel, reward, eopts));
    }
  };

  GrpoConfig grpo = config.grpo;
  TrainResult tr = train(initial, corpus, channel, reward, grpo, hooks);
  TrainOutcome outcome{tr.final_model, {}, {}, 0, 0};
  outcome.final_eval = evaluate(tr.final_model, corpus, Split::kHeldOut, channel, reward, eopts);
  outcome.metrics = std::move(tr.metrics);
  outcome.reference_hash_start = tr.reference_hash_start;
  outcome.reference_hash_end = tr.reference_hash_end;
  if (write) {
    const int final_step = config.grpo.updates;
    save_checkpoint(step_file(out, "checkpoint", final_step, ".bin"), tr.final_model);
    write_eval_csv(step_file(out, "eval", final_step, ".csv"), outcome.final_eval);
    flush_logs();
    write_report_csv(out / "report.csv",
                     {{to_string(mode), outcome.final_eval.corpus_cer,
                       outcome.final_eval.mean_nll_per_token, outcome.final_eval.mean_reward,
                       final_step}});
    write_file_atomic(out / "STATUS", "ok\n");
  }
  return outcome;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& config, const fs::path& out) {
  fs::create_directories(out);
  write_file_atomic(out / "STATUS", "running\n");
  try {
    config.validate();
    write_file_atomic(out / "config.copy", config.to_key_values().serialize());
    const PromptCorpus corpus = make_corpus(config);
    write_corpus(out / "corpus.txt", corpus);
    const AsrChannelModel channel = make_channel(config);
    write_channel(out / "channel.txt", channel);
    const PolicyModel pretrained = make_pretrained_policy(config, corpus, channel);
    save_checkpoint(out / "checkpoint_pretrained.bin", pretrained);

    const EvalOptions eopts{config.eval.decode, config.eval.temperature, config.eval.seed};
    const EvalReport base =
        evaluate(pretrained, corpus, Split::kHeldOut, channel, config.reward, eopts);
    fs::create_directories(out / "baseline");
    write_eval_csv(out / "baseline" / "eval_0.csv", base);
    std::vector<ReportRow> rows{
        {"baseline", base.corpus_cer, base.mean_nll_per_token, base.mean_reward, 0}};
    for (RewardMode mode : config.modes) {
      const TrainOutcome o =
          train_mode(config, mode, pretrained, corpus, channel, out / to_string(mode));
      rows.push_back({to_string(mode), o.final_eval.corpus_cer,
                      o.final_eval.mean_nll_per_token, o.final_eval.mean_reward,
                      config.grpo.updates});
    }
    write_report_csv(out / "report.csv", rows);
    write_file_atomic(out / "STATUS", "ok\n");
    return rows;
  } catch (const std::exception& e) {
    try {
      write_file_atomic(out / "STATUS", std::string("failed\n") + e.what() + "\n");
    } catch (const std::exception&) {
    }
    throw RunFailure(std::string("experiment failed: ") + e.what());
  }
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("pearson: coordinate lists differ in length");
  if (x.size() < 3) throw UndefinedMetricError("pearson needs at least 3 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw UndefinedMetricError("pearson: a coordinate has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult correlation_analysis(std::span<const CorrelationPoint> points, int min_len) {
  CorrelationResult res;
  for (const auto& p : points) {
    if (static_cast<long long>(p.text_len) >= min_len) res.points.push_back(p);
  }
  if (res.points.size() < 3) {
    throw UndefinedMetricError("correlation needs at least 3 points after filtering, got " +
                               std::to_string(res.points.size()));
  }
  std::vector<double> x, y;
  for (const auto& p : res.points) {
    x.push_back(p.r_cer);
    y.push_back(p.r_nll);
  }
  res.pearson_r = pearson(x, y);
  return res;
}

std::vector<CorrelationPoint> read_detail_points(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<CorrelationPoint> out;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ws(line).empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("text_len").get<std::size_t>(), j.at("r_cer").get<double>(),
                     j.at("r_nll").get<double>()});
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_scatter_csv(const fs::path& path, const CorrelationResult& result) {
  std::ostringstream out;
  out << "r_cer,r_nll\n";
  for (const auto& p : result.points) out << fmt_double(p.r_cer) << ',' << fmt_double(p.r_nll) << '\n';
  write_file_atomic(path, out.str());
}

std::vector<ComparisonRow> compare_runs(const std::vector<fs::path>& runs) {
  std::vector<ComparisonRow> out;
  std::vector<ReportRow> reference;
  bool have_reference = false;
  for (const auto& dir : runs) {
    std::string failure;
    std::vector<ReportRow> rows;
    if (!fs::is_directory(dir)) {
      failure = "missing directory";
    } else if (!fs::exists(dir / "STATUS") || read_file(dir / "STATUS").rfind("ok", 0) != 0) {
      failure = "incomplete run";
    } else {
      try {
        rows = read_report_csv(dir / "report.csv");
        if (rows.empty()) failure = "empty report";
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    if (!failure.empty()) {
      ComparisonRow r;
      r.run = dir.string();
      r.failure = failure;
      out.push_back(r);
      continue;
    }
    if (!have_reference) {
      reference = rows;
      have_reference = true;
    }
    for (const auto& row : rows) {
      const ReportRow* base = nullptr;
      for (const auto& ref : reference) {
        if (ref.mode == row.mode) base = &ref;
      }
      if (!base) {
        for (const auto& ref : reference) {
          if (ref.mode == "baseline") base = &ref;
        }
      }
      if (!base) base = &reference.front();
      ComparisonRow r;
      r.run = dir.string();
      r.mode = row.mode;
      r.ok = true;
      r.corpus_cer = row.corpus_cer;
      r.mean_nll = row.mean_nll;
      r.mean_reward = row.mean_reward;
      r.delta_cer = row.corpus_cer - base->corpus_cer;
      r.delta_nll = row.mean_nll - base->mean_nll;
      r.delta_reward = row.mean_reward - base->mean_reward;
      out.push_back(r);
    }
  }
  return out;
}

std::string format_comparison_text(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-32s %-10s %10s %10s %10s %10s %10s %10s\n", "run", "mode",
                "cer", "d_cer", "nll", "d_nll", "reward", "d_reward");
  out << buf;
  for (const auto& r : rows) {
    if (!r.ok) {
      std::snprintf(buf, sizeof buf, "%-32s FAILED: %s\n", r.run.c_str(), r.failure.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-32s %-10s %10.4f %+10.4f %10.4f %+10.4f %10.4f %+10.4f\n",
                    r.run.c_str(), r.mode.c_str(), r.corpus_cer, r.delta_cer, r.mean_nll,
                    r.delta_nll, r.mean_reward, r.delta_reward);
    }
    out << buf;
  }
  return out.str();
}

std::string format_comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "run,mode,status,corpus_cer,delta_cer,mean_nll,delta_nll,mean_reward,delta_reward\n";
  for (const auto& r : rows) {
    out << r.run << ',' << r.mode << ',' << (r.ok ? "ok" : "failed") << ','
        << fmt_double(r.corpus_cer) << ',' << fmt_double(r.delta_cer) << ','
        << fmt_double(r.mean_nll) << ',' << fmt_double(r.delta_nll) << ','
        << fmt_double(r.mean_reward) << ',' << fmt_double(r.delta_reward) << '\n';
  }
  return out.str();
}

}  // namespace asr_grpo

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

#ifndef ASR_GRPO_HARNESS_HPP_
#define ASR_GRPO_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asr_grpo/asr_sim.hpp"
#include "asr_grpo/config.hpp"
#include "asr_grpo/grpo.hpp"
#include "asr_grpo/policy.hpp"
#include "asr_grpo/reward.hpp"
#include "asr_grpo/seqcore.hpp"

namespace asr_grpo {

struct CorpusParams {
  std::uint64_t seed = 7;
  int text_vocab = 8;
  int speech_vocab = 16;
  int min_len = 4;
  int max_len = 8;
  int train_count = 512;
  int heldout_count = 64;
};

struct ChannelParams {
  std::string kind = "confusable";  // identity | confusable
  int frame_rate = 2;
  double noise = 0.05;
  double eps = 1e-4;
  std::uint64_t seed = 11;
};

struct PolicyParams {
  int hidden = 1024;
  int max_len = 0;  // 0: frame_rate * corpus.max_len + 2
  double embed_scale = 0.5;
  std::uint64_t seed = 13;
};

enum class DecodeMode { kGreedy, kSampled };

struct EvalParams {
  int every = 50;  // held-out evaluation interval in updates; 0: start and end only
  DecodeMode decode = DecodeMode::kGreedy;
  double temperature = 1.0;
  std::uint64_t seed = 17;
};

// Everything needed to reproduce a run. Defaults are the reference
// experiment.
struct ExperimentConfig {
  CorpusParams corpus;
  ChannelParams channel;
  PolicyParams policy;
  PretrainConfig pretrain{1200, 16, 2e-3, 2, 0.7, 0.05};
  std::uint64_t pretrain_seed = 19;
  RewardConfig reward;
  GrpoConfig grpo;
  EvalParams eval;
  std::vector<RewardMode> modes{RewardMode::kCerOnly, RewardMode::kNllOnly,
                                RewardMode::kCombined};
  int correlation_min_len = 4;
  int checkpoint_every = 50;  // 0: final checkpoint only
  bool log_detail = true;
  bool log_wall_time = false;  // wall_ms in metrics.jsonl; off keeps logs bit-reproducible

  ExperimentConfig();

  static ExperimentConfig from_key_values(const KeyValueConfig& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  KeyValueConfig to_key_values() const;
  void validate() const;

  int policy_max_len() const;
};

// Vocabularies, corpus, channel and initial policy built deterministically
// from a config.
VocabPtr make_text_vocab(const ExperimentConfig& config);
VocabPtr make_speech_vocab(const ExperimentConfig& config);
PromptCorpus make_corpus(const ExperimentConfig& config);
AsrChannelModel make_channel(const ExperimentConfig& config);
PolicyModel make_initial_policy(const ExperimentConfig& config);
PolicyModel make_pretrained_policy(const ExperimentConfig& config, const PromptCorpus& corpus,
                                   const AsrChannelModel& channel);

struct EvalRow {
  std::size_t prompt_id = 0;
  std::size_t ref_len = 0;
  std::size_t hyp_len = 0;
  std::size_t distance = 0;
  double cer = 0.0;
  double nll_total = 0.0;
  double nll_per_token = 0.0;
  double r_cer = 0.0;
  double r_nll = 0.0;
  double reward = 0.0;
};

struct EvalReport {
  double corpus_cer = 0.0;
  double mean_nll_per_token = 0.0;
  double mean_reward = 0.0;
  std::vector<EvalRow> rows;
};

struct EvalOptions {
  DecodeMode decode = DecodeMode::kGreedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;  // sampled decoding: prompt i uses SeededRng(seed).split(i)
};

EvalReport evaluate(const PolicyModel& model, const PromptCorpus& corpus, Split split,
                    const AsrChannelModel& channel, const RewardConfig& reward_config,
                    const EvalOptions& options = {});

// Rebuilds the summary numbers of a report from its rows.
EvalReport summarize_rows(std::vector<EvalRow> rows);

// eval_<step>.csv: header then one row per utterance.
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_eval_csv(const std::filesystem::path& path);

struct ReportRow {
  std::string mode;
  double corpus_cer = 0.0;
  double mean_nll = 0.0;
  double mean_reward = 0.0;
  int step = 0;
};

// report.csv: "mode,corpus_cer,mean_nll,mean_reward,step".
void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

struct TrainOutcome {
  PolicyModel final_model;
  EvalReport final_eval;
  std::vector<UpdateMetrics> metrics;
  std::uint64_t reference_hash_start = 0;
  std::uint64_t reference_hash_end = 0;
};

// GRPO-trains `initial` in `mode` and writes metrics.jsonl, detail.jsonl (if
// enabled), checkpoint_<step>.bin, eval_<step>.csv and report.csv into `out`.
// An empty `out` disables all file output.
TrainOutcome train_mode(const ExperimentConfig& config, RewardMode mode,
                        const PolicyModel& initial, const PromptCorpus& corpus,
                        const AsrChannelModel& channel, const std::filesystem::path& out);

// Full pipeline into `out`: config.copy, corpus.txt(+.split), channel.txt,
// checkpoint_pretrained.bin, baseline/eval_0.csv, one subdirectory per mode
// and report.csv with a baseline row plus one row per mode. STATUS holds "ok"
// or "failed" with a diagnostic; failures are rethrown as RunFailure.
std::vector<ReportRow> run_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& out);

struct CorrelationPoint {
  std::size_t text_len = 0;
  double r_cer = 0.0;
  double r_nll = 0.0;
};

struct CorrelationResult {
  double pearson_r = 0.0;
  std::vector<CorrelationPoint> points;  // after filtering
};

// Pearson coefficient; throws UndefinedMetricError below 3 points or when
// either coordinate is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Drops points with text_len < min_len, then correlates r_cer with r_nll.
CorrelationResult correlation_analysis(std::span<const CorrelationPoint> points, int min_len);

// Reads (text_len, r_cer, r_nll) from detail.jsonl files.
std::vector<CorrelationPoint> read_detail_points(const std::filesystem::path& path);

// Two-column scatter table "r_cer,r_nll".
void write_scatter_csv(const std::filesystem::path& path, const CorrelationResult& result);

struct ComparisonRow {
  std::string run;
  std::string mode;
  bool ok = false;
  std::string failure;
  double corpus_cer = 0.0;
  double mean_nll = 0.0;
  double mean_reward = 0.0;
  double delta_cer = 0.0;
  double delta_nll = 0.0;
  double delta_reward = 0.0;
};

// One row per (run, mode). Deltas are against the first run's row with the
// same mode, or its baseline row (else first row) when the mode is absent.
// Incomplete or missing runs produce a row with ok = false.
std::vector<ComparisonRow> compare_runs(const std::vector<std::filesystem::path>& runs);
std::string format_comparison_text(const std::vector<ComparisonRow>& rows);
std::string format_comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace asr_grpo

#endif  // ASR_GRPO_HARNESS_HPP_

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
#include <cstdlib>
#include <numeric>

#include "asr_grpo/error.hpp"
#include "asr_grpo/harness.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace asr_grpo {
namespace {

namespace fs = std::filesystem;

ExperimentConfig small_config() {
  KeyValueConfig kv = KeyValueConfig::parse(R"(
# tiny end-to-end setup
corpus.train_count = 24
corpus.heldout_count = 6
corpus.max_len = 5
policy.hidden = 16
pretrain.steps = 20
grpo.updates = 3
grpo.batch_prompts = 2
grpo.group_size = 4
grpo.learning_rate = 0.01
eval.every = 2
experiment.checkpoint_every = 2
)");
  return ExperimentConfig::from_key_values(kv);
}

TEST(ExperimentConfig, DefaultsAreReferenceExperiment) {
  const ExperimentConfig c;
  EXPECT_EQ(c.corpus.text_vocab, 8);
  EXPECT_EQ(c.corpus.speech_vocab, 16);
  EXPECT_EQ(c.channel.frame_rate, 2);
  EXPECT_EQ(c.corpus.min_len, 4);
  EXPECT_EQ(c.corpus.max_len, 8);
  EXPECT_EQ(c.corpus.train_count, 512);
  EXPECT_EQ(c.corpus.heldout_count, 64);
  EXPECT_EQ(c.grpo.group_size, 8);
  EXPECT_EQ(c.grpo.beta, 0.1);
  EXPECT_EQ(c.grpo.learning_rate, 1e-5);
  EXPECT_EQ(c.grpo.updates, 200);
  EXPECT_EQ(c.reward.mode, RewardMode::kCombined);
  EXPECT_EQ(c.correlation_min_len, 4);
  EXPECT_NO_THROW(c.validate());
}

#ifdef ASR_GRPO_SOURCE_DIR
TEST(ExperimentConfig, ShippedReferenceConfigMatchesDefaults) {
  const auto c = ExperimentConfig::load(fs::path(ASR_GRPO_SOURCE_DIR) / "configs" / "reference.conf");
  EXPECT_EQ(c.to_key_values().serialize(), ExperimentConfig().to_key_values().serialize());
}
#endif

TEST(ExperimentConfig, SerializationRoundTrip) {
  auto c = small_config();
  c.grpo.beta = 0.1 + 1e-17;
  c.modes = {RewardMode::kCombined, RewardMode::kCerOnly};
  c.eval.decode = DecodeMode::kSampled;
  const std::string text = c.to_key_values().serialize();
  const auto back = ExperimentConfig::from_key_values(KeyValueConfig::parse(text));
  EXPECT_EQ(back.to_key_values().serialize(), text);
  EXPECT_EQ(back.grpo.beta, c.grpo.beta);
  EXPECT_EQ(back.modes, c.modes);
}

TEST(ExperimentConfig, RejectsBadInput) {
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("grpo.betta = 1\n")),
               ConfigError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("grpo.beta = x\n")),
               ConfigError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("grpo.group_size = 1\n")),
               ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("channel.kind = fancy\n")),
               ConfigError);
}

// Greedy policy that emits the identity channel's code for every prompt
// token and then the end token. Hidden unit (y, o) fires on text y at frame
// offset o; one extra unit fires past the end of the prompt.
PolicyModel perfect_policy(const AsrChannelModel& ch, int max_len) {
  const int k = ch.frame_rate();
  const int tc = ch.text_vocab()->content_size();
  const int units = tc * k + 1;
  const int vs = ch.speech_vocab()->size();
  PolicyModel m(ch.text_vocab(), ch.speech_vocab(), k, units, max_len);
  const auto& L = m.layout();
  auto p = m.params();
  const double a = 10.0, c = 20.0;
  const auto H = static_cast<std::size_t>(units);
  std::vector<int> target(H);
  for (int y = 0; y < tc; ++y) {
    const auto code = ch.signature_tokens(ch.code_signature(y));
    for (int o = 0; o < k; ++o) {
      const auto u = static_cast<std::size_t>(y * k + o);
      p[L.text_embed + static_cast<std::size_t>(y) * H + u] = a;
      p[L.offset_embed + static_cast<std::size_t>(o) * H + u] = a;
      target[u] = code[static_cast<std::size_t>(o)];
    }
  }
  const std::size_t eos_unit = H - 1;
  p[L.text_embed + static_cast<std::size_t>(ch.text_vocab()->eos()) * H + eos_unit] = a;
  p[L.offset_embed + eos_unit] = a;
  target[eos_unit] = ch.speech_vocab()->eos();
  for (std::size_t u = 0; u < H; ++u) {
    p[L.hidden_bias + u] = -1.5 * a;
    p[L.out_weight + static_cast<std::size_t>(target[u]) * H + u] = c;
    p[L.out_bias + static_cast<std::size_t>(target[u])] += c;
  }
  (void)vs;
  return m;
}

TEST(Evaluate, PerfectPolicyOnIdentityChannel) {
  auto cfg = small_config();
  cfg.channel.kind = "identity";
  const auto corpus = make_corpus(cfg);
  const auto ch = make_channel(cfg);
  const auto m = perfect_policy(ch, cfg.policy_max_len());
  const auto rep = evaluate(m, corpus, Split::kHeldOut, ch, cfg.reward);
  EXPECT_EQ(rep.corpus_cer, 0.0);
  EXPECT_EQ(rep.rows.size(), corpus.indices(Split::kHeldOut).size());
  EXPECT_GT(rep.mean_reward, 0.99);
}

TEST(Evaluate, UniformPolicyRarelyDecodes) {
  auto cfg = small_config();
  cfg.corpus.heldout_count = 60;
  cfg.corpus.train_count = 40;
  const auto corpus = make_corpus(cfg);
  const auto ch = make_channel(cfg);
  const PolicyModel uniform(make_text_vocab(cfg), make_speech_vocab(cfg), 2, 4,
                            cfg.policy_max_len());
  const auto rep = evaluate(uniform, corpus, Split::kHeldOut, ch, cfg.reward,
                            {DecodeMode::kSampled, 1.0, 3});
  // A uniformly random frame is one of the 7 codes with probability 7/225,
  // so almost every emitted token is a miss or a length error.
  EXPECT_GT(rep.corpus_cer, 0.75);
  EXPECT_EQ(rep.rows.size(), 60u);
}

TEST(Evaluate, ReportRecomputableFromRows) {
  const auto cfg = small_config();
  const auto corpus = make_corpus(cfg);
  const auto ch = make_channel(cfg);
  const auto m = make_initial_policy(cfg);
  const auto rep = evaluate(m, corpus, Split::kTrain, ch, cfg.reward,
                            {DecodeMode::kSampled, 1.0, 5});
  std::size_t dist = 0, len = 0;
  double nll = 0.0, reward = 0.0;
  for (const auto& r : rep.rows) {
    dist += r.distance;
    len += r.ref_len;
    nll += r.nll_per_token;
    reward += r.reward;
    EXPECT_EQ(r.cer, static_cast<double>(r.distance) / static_cast<double>(r.ref_len));
  }
  EXPECT_EQ(rep.corpus_cer, static_cast<double>(dist) / static_cast<double>(len));
  EXPECT_NEAR(rep.mean_nll_per_token, nll / rep.rows.size(), 1e-15);
  EXPECT_NEAR(rep.mean_reward, reward / rep.rows.size(), 1e-15);

  const auto dir = testing::scratch_dir("eval_csv");
  write_eval_csv(dir / "eval.csv", rep);
  const auto back = read_eval_csv(dir / "eval.csv");
  EXPECT_EQ(back.corpus_cer, rep.corpus_cer);
  EXPECT_EQ(back.mean_nll_per_token, rep.mean_nll_per_token);
  EXPECT_EQ(back.mean_reward, rep.mean_reward);
  ASSERT_EQ(back.rows.size(), rep.rows.size());
  EXPECT_EQ(back.rows.back().r_nll, rep.rows.back().r_nll);

  const auto again = evaluate(m, corpus, Split::kTrain, ch, cfg.reward,
                              {DecodeMode::kSampled, 1.0, 5});
  EXPECT_EQ(again.corpus_cer, rep.corpus_cer);
  EXPECT_EQ(again.mean_reward, rep.mean_reward);
}

TEST(Correlation, Examples) {
  const std::vector<double> x{0.1, 0.4, 0.5, 0.9}, y{0.3, 0.9, 1.1, 1.9};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
  const std::vector<double> sx{0, 1, 0, 1}, sy{0, 1, 1, 0};
  EXPECT_NEAR(pearson(sx, sy), 0.0, 1e-12);
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
               UndefinedMetricError);
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
               UndefinedMetricError);
}

TEST(Correlation, FilterAndInvariances) {
  SeededRng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CorrelationPoint> pts(5 + rng.uniform_index(40));
    for (auto& p : pts) {
      p.text_len = 1 + rng.uniform_index(8);
      p.r_cer = rng.uniform01();
      p.r_nll = 0.5 * p.r_cer + 0.5 * rng.uniform01();
    }
    std::vector<double> x, y;
    for (const auto& p : pts) {
      if (p.text_len >= 3) {
        x.push_back(p.r_cer);
        y.push_back(p.r_nll);
      }
    }
    if (x.size() < 3) {
      EXPECT_THROW(correlation_analysis(pts, 3), UndefinedMetricError);
      continue;
    }
    const auto base = correlation_analysis(pts, 3);
    EXPECT_EQ(base.points.size(), x.size());
    EXPECT_NEAR(base.pearson_r, oracle::pearson(x, y), 1e-12);
    auto shuffled = pts;
    for (std::size_t i = shuffled.size(); i > 1; --i) {
      std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
    }
    const double a = 0.1 + 10 * rng.uniform01(), b = rng.uniform01() - 0.5;
    for (auto& p : shuffled) p.r_nll = a * p.r_nll + b;
    EXPECT_NEAR(correlation_analysis(shuffled, 3).pearson_r, base.pearson_r, 1e-9);
  }
}

TEST(ReportCsv, RoundTrip) {
  const auto dir = testing::scratch_dir("report_csv");
  const std::vector<ReportRow> rows{{"baseline", 0.3, 1.2, 0.4, 0}, {"combined", 0.1 / 3, 0.7, 0.8, 200}};
  write_report_csv(dir / "report.csv", rows);
  const auto back = read_report_csv(dir / "report.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].mode, "combined");
  EXPECT_EQ(back[1].corpus_cer, 0.1 / 3);
  EXPECT_EQ(back[1].step, 200);
}

class RunExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(testing::scratch_dir("run_experiment"));
    rows_ = new std::vector<ReportRow>(run_experiment(small_config(), *dir_ / "a"));
  }
  static void TearDownTestSuite() {
    delete rows_;
    delete dir_;
  }
  static fs::path* dir_;
  static std::vector<ReportRow>* rows_;
};
fs::path* RunExperimentTest::dir_ = nullptr;
std::vector<ReportRow>* RunExperimentTest::rows_ = nullptr;

TEST_F(RunExperimentTest, WritesExpectedArtifacts) {
  const fs::path a = *dir_ / "a";
  ASSERT_EQ(rows_->size(), 4u);
  EXPECT_EQ((*rows_)[0].mode, "baseline");
  EXPECT_EQ((*rows_)[1].mode, "cer_only");
  EXPECT_EQ((*rows_)[2].mode, "nll_only");
  EXPECT_EQ((*rows_)[3].mode, "combined");
  EXPECT_EQ(read_file(a / "STATUS"), "ok\n");
  for (const char* f : {"config.copy", "corpus.txt", "corpus.txt.split", "channel.txt",
                        "checkpoint_pretrained.bin", "baseline/eval_0.csv", "report.csv"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  for (const char* m : {"cer_only", "nll_only", "combined"}) {
    for (const char* f : {"metrics.jsonl", "detail.jsonl", "eval_0.csv", "eval_2.csv",
                          "eval_3.csv", "checkpoint_2.bin", "checkpoint_3.bin", "report.csv"}) {
      EXPECT_TRUE(fs::exists(a / m / f)) << m << "/" << f;
    }
  }
  const auto cfg = ExperimentConfig::load(a / "config.copy");
  EXPECT_EQ(cfg.to_key_values().serialize(), small_config().to_key_values().serialize());
  EXPECT_EQ(read_corpus(a / "corpus.txt"), make_corpus(small_config()));
}

TEST_F(RunExperimentTest, RerunIsIdentical) {
  run_experiment(small_config(), *dir_ / "b");
  for (const char* f : {"report.csv", "combined/metrics.jsonl", "combined/detail.jsonl",
                        "cer_only/checkpoint_3.bin", "nll_only/eval_3.csv"}) {
    EXPECT_EQ(read_file(*dir_ / "a" / f), read_file(*dir_ / "b" / f)) << f;
  }
}

TEST_F(RunExperimentTest, EvalOfPretrainedCheckpointIsBaselineRow) {
  const fs::path a = *dir_ / "a";
  const auto cfg = small_config();
  const auto rep = evaluate(load_checkpoint(a / "checkpoint_pretrained.bin"),
                            read_corpus(a / "corpus.txt"), Split::kHeldOut,
                            read_channel(a / "channel.txt"), cfg.reward);
  EXPECT_EQ(rep.corpus_cer, (*rows_)[0].corpus_cer);
  EXPECT_EQ(rep.mean_reward, (*rows_)[0].mean_reward);
}

TEST_F(RunExperimentTest, DetailAndMetricsLogs) {
  const fs::path m = *dir_ / "a" / "combined";
  const auto pts = read_detail_points(m / "detail.jsonl");
  EXPECT_EQ(pts.size(), 3u * 2u * 4u);
  const auto metrics = read_file(m / "metrics.jsonl");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
  EXPECT_NE(metrics.find("\"wall_ms\":0.0"), std::string::npos);
}

TEST_F(RunExperimentTest, CompareRuns) {
  const auto self = compare_runs({*dir_ / "a", *dir_ / "a"});
  ASSERT_EQ(self.size(), 8u);
  for (const auto& r : self) {
    EXPECT_TRUE(r.ok);
    EXPECT_EQ(r.delta_cer, 0.0);
    EXPECT_EQ(r.delta_nll, 0.0);
    EXPECT_EQ(r.delta_reward, 0.0);
  }
  const auto missing = compare_runs({*dir_ / "a", *dir_ / "nope"});
  EXPECT_FALSE(missing.back().ok);
  EXPECT_NE(format_comparison_text(missing).find("FAILED"), std::string::npos);
  EXPECT_NE(format_comparison_csv(missing).find(",failed,"), std::string::npos);

  // A single-mode run compares against the first run's matching row.
  const auto combined = compare_runs({*dir_ / "a", *dir_ / "a" / "combined"});
  const auto& last = combined.back();
  EXPECT_EQ(last.mode, "combined");
  EXPECT_EQ(last.delta_cer, 0.0);

  const fs::path partial = *dir_ / "partial";
  fs::create_directories(partial);
  write_file_atomic(partial / "STATUS", "running\n");
  EXPECT_FALSE(compare_runs({*dir_ / "a", partial}).back().ok);
}

TEST(RunExperiment, FailureMarksStatus) {
  const auto dir = testing::scratch_dir("run_fail");
  auto cfg = small_config();
  cfg.corpus.min_len = 9;  // above max_len
  EXPECT_THROW(run_experiment(cfg, dir), RunFailure);
  EXPECT_EQ(read_file(dir / "STATUS").rfind("failed", 0), 0u);
}

#ifdef ASR_GRPO_CLI
int cli(const std::string& args) {
  const int rc = std::system((std::string(ASR_GRPO_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = testing::scratch_dir("cli");
  const std::string d = dir.string();
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("gen-corpus"), 1);
  EXPECT_EQ(cli("gen-corpus --out " + d + "/c --set nope=1"), 1);
  EXPECT_EQ(cli("gen-corpus --out " + d + "/c --set corpus.train_count=10"), 0);
  EXPECT_TRUE(fs::exists(dir / "c" / "corpus.txt"));
  EXPECT_TRUE(fs::exists(dir / "c" / "config.copy"));
  EXPECT_EQ(cli("gen-channel --out " + d + "/ch --channel identity"), 0);
  EXPECT_EQ(read_channel(dir / "ch" / "channel.txt").frame_rate(), 2);
  EXPECT_EQ(cli("gen-channel --out " + d + "/ch --channel fancy"), 1);
  EXPECT_EQ(cli("compare " + d + "/c"), 1);
  EXPECT_EQ(cli("compare " + d + "/c " + d + "/missing"), 2);
  EXPECT_EQ(cli("eval --out " + d + "/e --checkpoint " + d + "/missing.bin"), 2);
  EXPECT_EQ(cli("correlate " + d + "/missing"), 1);
}
#endif

}  // namespace
}  // namespace asr_grpo

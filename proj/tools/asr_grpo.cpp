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

// Command-line driver: one verb per pipeline stage, plus `run` for the whole
// experiment. Exit codes: 0 success, 1 usage error, 2 run failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asr_grpo/error.hpp"
#include "asr_grpo/harness.hpp"

namespace fs = std::filesystem;
using namespace asr_grpo;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "Key-value config file")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
  cmd->add_option("--set", c.sets, "Override a config key (key=value)");
}

ExperimentConfig load_config(const Common& c) {
  KeyValueConfig kv = c.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config);
  for (const auto& s : c.sets) kv.set_assignment(s);
  return ExperimentConfig::from_key_values(kv);
}

fs::path prepare_out(const Common& c, const ExperimentConfig& config) {
  const fs::path out(c.out);
  fs::create_directories(out);
  write_file_atomic(out / "config.copy", config.to_key_values().serialize());
  return out;
}

PromptCorpus corpus_from(const std::string& path, const ExperimentConfig& config) {
  return path.empty() ? make_corpus(config) : read_corpus(path);
}

AsrChannelModel channel_from(const std::string& path, const ExperimentConfig& config) {
  return path.empty() ? make_channel(config) : read_channel(path);
}

Split parse_split(const std::string& s) {
  if (s == "heldout") return Split::kHeldOut;
  if (s == "train") return Split::kTrain;
  throw UsageError("--split must be heldout or train");
}

// Detail files given directly, or found anywhere under a run directory.
std::vector<fs::path> detail_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "detail.jsonl") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw UsageError("no such file or directory: " + in);
    }
  }
  if (files.empty()) throw UsageError("no detail.jsonl files found");
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRPO fine-tuning of a toy speech-token policy against a simulated ASR reward"};
  app.require_subcommand(1);

  Common common;
  std::string corpus_path, channel_path, init_path, checkpoint_path, mode, label = "baseline";
  std::string split = "heldout", decode, channel_kind;
  std::optional<double> noise;
  std::optional<int> min_len;
  std::vector<std::string> inputs;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "Generate the prompt corpus");
  add_common(gen_corpus, common, true);

  auto* gen_channel = app.add_subcommand("gen-channel", "Build the ASR channel definition");
  add_common(gen_channel, common, true);
  gen_channel->add_option("--channel", channel_kind, "identity | confusable")
      ->check(CLI::IsMember({"identity", "confusable"}));
  gen_channel->add_option("--noise", noise, "Uniform mixing mass for confusable channels");

  auto* pretrain = app.add_subcommand("pretrain", "Supervised pretraining on noisy codes");
  add_common(pretrain, common, true);
  pretrain->add_option("--corpus", corpus_path, "Corpus file (default: generate)");
  pretrain->add_option("--channel", channel_path, "Channel file (default: generate)");

  auto* train = app.add_subcommand("train", "GRPO training in one reward mode");
  add_common(train, common, true);
  train->add_option("--init", init_path, "Initial checkpoint (default: pretrain first)");
  train->add_option("--corpus", corpus_path, "Corpus file (default: generate)");
  train->add_option("--channel", channel_path, "Channel file (default: generate)");
  train->add_option("--mode", mode, "cer_only | nll_only | combined (default: reward.mode)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, common, true);
  eval->add_option("--checkpoint", checkpoint_path, "Policy checkpoint")->required();
  eval->add_option("--corpus", corpus_path, "Corpus file (default: generate)");
  eval->add_option("--channel", channel_path, "Channel file (default: generate)");
  eval->add_option("--label", label, "Row label in report.csv");
  eval->add_option("--split", split, "heldout | train");
  eval->add_option("--decode", decode, "greedy | sampled (default: eval.decode)");

  auto* compare = app.add_subcommand("compare", "Side-by-side table of run directories");
  add_common(compare, common, false);
  compare->add_option("runs", inputs, "Run directories")->required();

  auto* correlate = app.add_subcommand("correlate", "Pearson r between R_CER and R_NLL");
  add_common(correlate, common, false);
  correlate->add_option("inputs", inputs, "detail.jsonl files or run directories")->required();
  correlate->add_option("--min-len", min_len, "Drop utterances shorter than this");

  auto* run = app.add_subcommand("run", "Full experiment: baseline plus every ablation mode");
  add_common(run, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen_corpus) {
      const auto config = load_config(common);
      const auto out = prepare_out(common, config);
      const auto corpus = make_corpus(config);
      write_corpus(out / "corpus.txt", corpus);
      std::printf("%zu prompts (%zu held out) -> %s\n", corpus.size(),
                  corpus.indices(Split::kHeldOut).size(), (out / "corpus.txt").c_str());
    } else if (*gen_channel) {
      if (!channel_kind.empty()) common.sets.push_back("channel.kind=" + channel_kind);
      if (noise) common.sets.push_back("channel.noise=" + std::to_string(*noise));
      const auto config = load_config(common);
      const auto out = prepare_out(common, config);
      write_channel(out / "channel.txt", make_channel(config));
      std::printf("%s channel -> %s\n", config.channel.kind.c_str(),
                  (out / "channel.txt").c_str());
    } else if (*pretrain) {
      const auto config = load_config(common);
      const auto out = prepare_out(common, config);
      const auto corpus = corpus_from(corpus_path, config);
      const auto channel = channel_from(channel_path, config);
      save_checkpoint(out / "checkpoint_pretrained.bin",
                      make_pretrained_policy(config, corpus, channel));
      std::printf("pretrained -> %s\n", (out / "checkpoint_pretrained.bin").c_str());
    } else if (*train) {
      const auto config = load_config(common);
      const auto out = prepare_out(common, config);
      const auto corpus = corpus_from(corpus_path, config);
      const auto channel = channel_from(channel_path, config);
      const RewardMode m = mode.empty() ? config.reward.mode : parse_reward_mode(mode);
      const PolicyModel init = init_path.empty()
                                   ? make_pretrained_policy(config, corpus, channel)
                                   : load_checkpoint(init_path);
      const auto outcome = train_mode(config, m, init, corpus, channel, out);
      std::printf("%s: corpus_cer %.4f  mean_nll %.4f  mean_reward %.4f\n", to_string(m).c_str(),
                  outcome.final_eval.corpus_cer, outcome.final_eval.mean_nll_per_token,
                  outcome.final_eval.mean_reward);
    } else if (*eval) {
      if (!decode.empty()) common.sets.push_back("eval.decode=" + decode);
      const auto config = load_config(common);
      const auto out = prepare_out(common, config);
      const auto corpus = corpus_from(corpus_path, config);
      const auto channel = channel_from(channel_path, config);
      const auto model = load_checkpoint(checkpoint_path);
      const EvalOptions opts{config.eval.decode, config.eval.temperature, config.eval.seed};
      const auto report =
          evaluate(model, corpus, parse_split(split), channel, config.reward, opts);
      write_eval_csv(out / "eval_0.csv", report);
      write_report_csv(out / "report.csv", {{label, report.corpus_cer, report.mean_nll_per_token,
                                             report.mean_reward, 0}});
      write_file_atomic(out / "STATUS", "ok\n");
      std::printf("%s: corpus_cer %.4f  mean_nll %.4f  mean_reward %.4f\n", label.c_str(),
                  report.corpus_cer, report.mean_nll_per_token, report.mean_reward);
    } else if (*compare) {
      if (inputs.size() < 2) throw UsageError("compare needs at least two run directories");
      std::vector<fs::path> runs(inputs.begin(), inputs.end());
      const auto rows = compare_runs(runs);
      const std::string text = format_comparison_text(rows);
      std::cout << text;
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        write_file_atomic(fs::path(common.out) / "compare.txt", text);
        write_file_atomic(fs::path(common.out) / "compare.csv", format_comparison_csv(rows));
      }
      for (const auto& r : rows) {
        if (!r.ok) return 2;
      }
    } else if (*correlate) {
      const auto config = load_config(common);
      std::vector<CorrelationPoint> points;
      for (const auto& f : detail_files(inputs)) {
        const auto p = read_detail_points(f);
        points.insert(points.end(), p.begin(), p.end());
      }
      const auto result =
          correlation_analysis(points, min_len ? *min_len : config.correlation_min_len);
      std::printf("pearson_r %.17g over %zu points\n", result.pearson_r, result.points.size());
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        write_scatter_csv(fs::path(common.out) / "scatter.csv", result);
        char buf[96];
        std::snprintf(buf, sizeof buf, "pearson_r=%.17g\npoints=%zu\n", result.pearson_r,
                      result.points.size());
        write_file_atomic(fs::path(common.out) / "correlation.txt", buf);
      }
    } else if (*run) {
      const auto config = load_config(common);
      const auto rows = run_experiment(config, common.out);
      for (const auto& r : rows) {
        std::printf("%-10s corpus_cer %.4f  mean_nll %.4f  mean_reward %.4f\n", r.mode.c_str(),
                    r.corpus_cer, r.mean_nll, r.mean_reward);
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

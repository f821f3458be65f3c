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

#include <benchmark/benchmark.h>

#include <vector>

#include "asr_grpo/editdist.hpp"
#include "asr_grpo/grpo_math.hpp"
#include "asr_grpo/harness.hpp"
#include "asr_grpo/policy.hpp"

namespace {

using namespace asr_grpo;

void BM_EditDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  std::vector<TokenId> a(n), b(n);
  for (auto& t : a) t = static_cast<TokenId>(rng.uniform_index(8));
  for (auto& t : b) t = static_cast<TokenId>(rng.uniform_index(8));
  for (auto _ : state) benchmark::DoNotOptimize(edit_distance(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EditDistance)->RangeMultiplier(4)->Range(8, 512)->Complexity();

void BM_Advantages(benchmark::State& state) {
  SeededRng rng(2);
  std::vector<double> r(static_cast<std::size_t>(state.range(0)));
  for (double& x : r) x = rng.uniform01();
  for (auto _ : state) benchmark::DoNotOptimize(compute_advantages(r, 1e-8));
}
BENCHMARK(BM_Advantages)->Arg(8)->Arg(32);

struct Reference {
  ExperimentConfig cfg;
  PromptCorpus corpus = make_corpus(cfg);
  AsrChannelModel channel = make_channel(cfg);
  PolicyModel model = make_initial_policy(cfg);
};

const Reference& reference() {
  static const Reference r;
  return r;
}

void BM_SampleRollout(benchmark::State& state) {
  const auto& ref = reference();
  PolicyModel m = ref.model;
  m.params()[m.layout().out_weight] = 0.1;
  SeededRng rng(3);
  std::size_t tokens = 0;
  for (auto _ : state) {
    const auto r = sample(m, ref.corpus[0], {}, rng);
    tokens += r.output.size();
  }
  state.counters["tokens/s"] = benchmark::Counter(static_cast<double>(tokens), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SampleRollout);

void BM_ObjectiveGradient(benchmark::State& state) {
  const auto& ref = reference();
  SeededRng rng(4);
  std::vector<Rollout> group;
  for (int i = 0; i < 8; ++i) {
    Rollout r = sample(ref.model, ref.corpus[1], {}, rng);
    r.logp_ref = r.logp_current;
    group.push_back(std::move(r));
  }
  std::vector<double> rewards(8);
  for (double& x : rewards) x = rng.uniform01();
  const auto adv = compute_advantages(rewards, 1e-8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective_gradient(ref.model, group, adv, {0.1, 0.0}).value);
  }
}
BENCHMARK(BM_ObjectiveGradient)->Unit(benchmark::kMicrosecond);

void BM_GrpoUpdate(benchmark::State& state) {
  const auto& ref = reference();
  GrpoConfig cfg = ref.cfg.grpo;
  TrainState st(ref.model, cfg);
  std::vector<std::size_t> ids(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const SeededRng root(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_update(st, ids, ref.corpus, ref.channel, ref.cfg.reward, cfg, root));
  }
}
BENCHMARK(BM_GrpoUpdate)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

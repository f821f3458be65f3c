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

#ifndef ASR_GRPO_OPTIM_HPP_
#define ASR_GRPO_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asr_grpo {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

// First-order ascent on a flat parameter vector.
//   sgd:  theta += lr * g
//   adam: Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias
//         correction; the step is applied in the ascent direction.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t size);

  void ascend(std::span<double> params, std::span<const double> gradient);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  std::int64_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace asr_grpo

#endif  // ASR_GRPO_OPTIM_HPP_

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

// Reference implementations the tests compare against. They share no code
// with the library.

#ifndef ASR_GRPO_TESTS_ORACLES_HPP_
#define ASR_GRPO_TESTS_ORACLES_HPP_

#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cstddef>
#include <vector>

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

inline double reward_cer(double cer, double alpha_c) {
  return static_cast<double>(Big(1) - tanh(Big(alpha_c) * Big(cer)));
}

inline double reward_nll(double nll, double alpha_n) {
  return static_cast<double>(exp(-Big(nll) / Big(alpha_n)));
}

inline double combine(double r_cer, double r_nll, double lc, double ln) {
  if (lc == 0.0) return r_nll;
  if (ln == 0.0) return r_cer;
  if (r_cer == 0.0 || r_nll == 0.0) return 0.0;
  const Big den = Big(lc) / Big(r_cer) + Big(ln) / Big(r_nll);
  return static_cast<double>((Big(lc) + Big(ln)) / den);
}

// Exponential recursion with the matching-last-symbol shortcut, which keeps
// the search exact: when the last symbols agree, dropping both is optimal.
inline std::size_t edit_distance(const std::vector<int>& a, std::size_t n,
                                 const std::vector<int>& b, std::size_t m) {
  if (n == 0) return m;
  if (m == 0) return n;
  if (a[n - 1] == b[m - 1]) return edit_distance(a, n - 1, b, m - 1);
  return 1 + std::min({edit_distance(a, n - 1, b, m - 1), edit_distance(a, n - 1, b, m),
                       edit_distance(a, n, b, m - 1)});
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  Big mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  Big sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Big dx = Big(x[i]) - mx, dy = Big(y[i]) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return static_cast<double>(sxy / sqrt(sxx * syy));
}

// Population mean and standard deviation.
inline std::pair<double, double> moments(const std::vector<double>& v) {
  Big m = 0;
  for (double x : v) m += x;
  m /= v.size();
  Big s = 0;
  for (double x : v) s += (Big(x) - m) * (Big(x) - m);
  return {static_cast<double>(m), static_cast<double>(sqrt(s / v.size()))};
}

}  // namespace oracle

#endif  // ASR_GRPO_TESTS_ORACLES_HPP_

// Copyright (c) 2026 SASR Authors
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

#include "sasr/diffkern/optimizer.h"

#include <algorithm>
#include <cmath>

namespace sasr {

void Adam::Step(TensorMap<float>* params, const TensorMap<float>& grads,
                double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const float b1 = static_cast<float>(config_.beta1);
  const float b2 = static_cast<float>(config_.beta2);
  for (auto& [name, p] : *params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const auto& g = git->second;
    auto [mit, m_new] = m_.try_emplace(name, p.shape());
    auto [vit, v_new] = v_.try_emplace(name, p.shape());
    auto& m = mit->second;
    auto& v = vit->second;
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + config_.eps));
    }
  }
}

double TriangularSchedule::At(int64_t step) const {
  if (total_steps <= 1) return peak;
  const double last = static_cast<double>(total_steps - 1);
  const double rise = std::max(1.0, rise_fraction * last);
  const double s = std::clamp(static_cast<double>(step), 0.0, last);
  if (s <= rise) return floor + (peak - floor) * (s / rise);
  const double fall = std::max(1.0, last - rise);
  return peak - (peak - floor) * ((s - rise) / fall);
}

double ClipGlobalNorm(TensorMap<float>* grads, double max_norm) {
  double sq = 0;
  for (const auto& [name, g] : *grads) {
    for (float v : g.values()) sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& [name, g] : *grads) {
      for (float& v : g.values()) v *= s;
    }
  }
  return norm;
}

void AccumulateGrads(TensorMap<float>* dst, const TensorMap<float>& src,
                     float factor) {
  for (const auto& [name, g] : src) {
    auto [it, inserted] = dst->try_emplace(name, g.shape());
    auto& d = it->second;
    for (size_t i = 0; i < g.size(); ++i) d[i] += factor * g[i];
  }
}

}  // namespace sasr

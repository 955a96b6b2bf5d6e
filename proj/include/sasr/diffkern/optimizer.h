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

#ifndef SASR_DIFFKERN_OPTIMIZER_H_
#define SASR_DIFFKERN_OPTIMIZER_H_

#include <cstdint>
#include <string>

#include "sasr/diffkern/tensor.h"

namespace sasr {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to every parameter that has a gradient.
  void Step(TensorMap<float>* params, const TensorMap<float>& grads,
            double lr);

  int64_t steps() const { return steps_; }

 private:
  AdamConfig config_;
  int64_t steps_ = 0;
  TensorMap<float> m_;
  TensorMap<float> v_;
};

// Triangular cycle: linear rise floor -> peak over the first rise_fraction of
// the run, then linear fall back to floor at the last step.
struct TriangularSchedule {
  double peak = 2e-3;
  double floor = 1e-4;
  double rise_fraction = 0.15;
  int64_t total_steps = 1000;

  double At(int64_t step) const;
};

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double ClipGlobalNorm(TensorMap<float>* grads, double max_norm);

// Adds src into dst (creating entries as needed), scaled by factor.
void AccumulateGrads(TensorMap<float>* dst, const TensorMap<float>& src,
                     float factor = 1.0f);

}  // namespace sasr

#endif  // SASR_DIFFKERN_OPTIMIZER_H_

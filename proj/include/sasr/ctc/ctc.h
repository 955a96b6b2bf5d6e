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

#ifndef SASR_CTC_CTC_H_
#define SASR_CTC_CTC_H_

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sasr/diffkern/graph.h"
#include "sasr/diffkern/tensor.h"

namespace sasr {

class CtcInfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fewest frames that can carry the labels: one per label plus a blank
// between each pair of equal neighbours.
int CtcMinFrames(const std::vector<int>& labels);

// -log of the total probability of all alignments of labels under the
// T x V log-probability matrix. When grad is non-null it receives
// d loss / d logp (same shape). Throws CtcInfeasibleError when T is too
// small and std::invalid_argument for empty labels or bad ids.
template <typename T>
double CtcLoss(const Tensor<T>& logp, const std::vector<int>& labels,
               int blank, Tensor<T>* grad = nullptr);

// Scalar-output graph op computing CtcLoss of its single input.
std::shared_ptr<const CustomOp> MakeCtcOp(std::vector<int> labels, int blank);

// Sum over rows of the entropy (nats) of exp(logp row).
template <typename T>
double EntropyTerm(const Tensor<T>& logp);

// Graph form of EntropyTerm: -Sum(Exp(x) * x).
NodeId AddEntropy(Graph* g, NodeId logp);

struct HctcConfig {
  double entropy_weight = 0.01;
  std::array<double, 3> level_weights = {1.0, 1.0, 1.0};
};

// Nodes of the composite loss. total = sum_k w_k (ctc_k - lambda * ent_k).
struct HctcNodes {
  NodeId total = -1;
  std::vector<NodeId> ctc;
  std::vector<NodeId> entropy;
};

// ctc_inputs[k] feeds the CTC term (it may be a penalized copy of
// entropy_inputs[k], see ElPenaltyMatrix); entropy is taken on
// entropy_inputs[k]. Registers outputs "loss", "ctcK" and "entK".
HctcNodes AddHctcLoss(Graph* g, const std::vector<NodeId>& ctc_inputs,
                      const std::vector<NodeId>& entropy_inputs,
                      const std::vector<std::vector<int>>& targets,
                      const std::vector<int>& blanks, const HctcConfig& cfg);

// Direct evaluation of the same formula.
double HctcLoss(const std::vector<TensorD>& logp,
                const std::vector<std::vector<int>>& targets,
                const std::vector<int>& blanks, const HctcConfig& cfg);

struct AlignmentResult {
  std::vector<int> path;  // token id per frame, blanks included
  double path_log_prob = 0;
  int endpoint_frame = -1;  // last frame emitting a non-blank token
  int endpoint_ms = 0;      // (endpoint_frame + 1) * frame_ms
};

// Viterbi best alignment. Among equally probable paths the one whose
// non-blank emissions happen earliest wins.
AlignmentResult ForcedAlign(const TensorF& logp,
                            const std::vector<int>& labels, int blank,
                            int frame_ms = 30);

struct ElPenaltyConfig {
  double w_early = 0.1;
  double w_late = 0.1;
  int early_grace = 5;
  int late_grace = 10;
};

// T x V matrix that is zero except the </s> column, which holds
// -w_e max(0, ref - d_e - t) - w_l max(0, t - ref - d_l). Adding it to a
// grid gives the early-late augmented grid (rows are not renormalized).
TensorF ElPenaltyMatrix(int frames, int vocab, int eos_id, int eos_ref_frame,
                        const ElPenaltyConfig& cfg);

void ElAugment(TensorF* logp, int eos_id, int eos_ref_frame,
               const ElPenaltyConfig& cfg);

// "id endpoint_ms tok:count tok:count ..." with runs of equal token ids.
std::string AlignmentLine(const std::string& id, const AlignmentResult& a);

}  // namespace sasr

#endif  // SASR_CTC_CTC_H_

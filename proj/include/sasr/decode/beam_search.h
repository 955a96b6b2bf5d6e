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

#ifndef SASR_DECODE_BEAM_SEARCH_H_
#define SASR_DECODE_BEAM_SEARCH_H_

#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "sasr/diffkern/frame_rows.h"

namespace sasr {

struct DecodeConfig {
  int beam = 1000;
  // Per-frame symbol pruning; top_k <= 0 or an infinite floor disables it.
  int top_k = 40;
  double prune_floor = -10.0;  // relative to the frame maximum, natural log
  int pool = 100;              // hypotheses handed to rescoring
};

struct Hypothesis {
  std::vector<int> prefix;  // no blank, no </s>
  double log_pb = -std::numeric_limits<double>::infinity();
  double log_pnb = -std::numeric_limits<double>::infinity();

  double score() const;
};

// Score-descending, then prefix-lexicographic.
bool HypothesisBefore(const Hypothesis& a, const Hypothesis& b);

// CTC prefix beam search, fed one posterior row at a time. blank and </s>
// (eos; -1 if absent) never extend a prefix; both carry blank mass.
class PrefixBeamSearch {
 public:
  PrefixBeamSearch(int blank, int eos, const DecodeConfig& cfg);

  void Step(const float* log_probs, int vocab);
  void StepAll(const FrameRows& rows);

  // Current beam, best first. Holds the single empty prefix (score 0)
  // before the first step.
  const std::vector<Hypothesis>& beam() const { return beam_; }
  const Hypothesis& best() const { return beam_.front(); }
  int frames() const { return frames_; }

 private:
  int blank_;
  int eos_;
  DecodeConfig cfg_;
  std::vector<Hypothesis> beam_;
  int frames_ = 0;
};

// Batch form. Throws std::invalid_argument on an empty grid.
std::vector<Hypothesis> PrefixBeamDecode(const FrameRows& grid, int blank,
                                         int eos, const DecodeConfig& cfg);

}  // namespace sasr

#endif  // SASR_DECODE_BEAM_SEARCH_H_

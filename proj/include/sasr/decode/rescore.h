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

#ifndef SASR_DECODE_RESCORE_H_
#define SASR_DECODE_RESCORE_H_

#include <array>
#include <string>
#include <vector>

#include "sasr/decode/beam_search.h"
#include "sasr/decode/ngram.h"
#include "sasr/diffkern/frame_rows.h"
#include "sasr/tokenizer/vocabulary.h"

namespace sasr {

struct RescoreWeights {
  double w_lm = 0;
  double w_char = 0;
  double w_s300 = 0;
  double w_len = 0;

  std::array<double, 4> as_array() const { return {w_lm, w_char, w_s300, w_len}; }
};

// Component scores of one pool member; lower-level CTC terms are -inf when
// the text cannot be aligned to that grid.
struct ScoredHypothesis {
  std::string text;
  double beam = 0;
  double lm = 0;          // log10
  double neg_ctc_char = 0;
  double neg_ctc_small = 0;
  int words = 0;

  double Final(const RescoreWeights& w) const;
};

// Takes the first cfg.pool hypotheses of a ranked beam, drops duplicate
// texts (keeping the better-ranked one) and computes every component.
std::vector<ScoredHypothesis> ScorePool(
    const std::vector<Hypothesis>& beam, int pool,
    const FrameRows& char_grid, const FrameRows& small_grid,
    const TokenizerSet& tokenizers, const NgramModel* lm);

// Argmax of Final; ties go to the smaller text. Requires a non-empty pool.
const ScoredHypothesis& PickBest(const std::vector<ScoredHypothesis>& pool,
                                 const RescoreWeights& w);

// Word-level Levenshtein distance.
int WordErrors(const std::string& ref, const std::string& hyp);
int WordCount(const std::string& text);

struct DevUtterance {
  std::string reference;
  std::vector<ScoredHypothesis> pool;
};

struct WeightCandidates {
  std::vector<double> w_lm = {0};
  std::vector<double> w_char = {0};
  std::vector<double> w_s300 = {0};
  std::vector<double> w_len = {0};
};

struct GridSearchResult {
  RescoreWeights best;
  double wer = 0;
  int evaluated = 0;
};

// Exhaustive search over the candidate lattice for the lowest corpus WER;
// ties go to the lexicographically smallest weight tuple.
GridSearchResult GridSearchWeights(const std::vector<DevUtterance>& dev,
                                   const WeightCandidates& candidates);

// Corpus WER of the picks under w: total word errors / total reference
// words (0 when both are 0).
double CorpusWer(const std::vector<DevUtterance>& dev, const RescoreWeights& w);

}  // namespace sasr

#endif  // SASR_DECODE_RESCORE_H_

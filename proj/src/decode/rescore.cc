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

#include "sasr/decode/rescore.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sasr/ctc/ctc.h"

namespace sasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::string> Split(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// A zero weight switches its term off, so -inf components cannot turn the
// total into NaN.
double Term(double weight, double value) {
  return weight == 0 ? 0.0 : weight * value;
}

double NegCtc(const FrameRows& grid, const Vocabulary& vocab,
              const std::string& text) {
  if (grid.rows() == 0) return kNegInf;
  try {
    const std::vector<int> ids = vocab.Encode(text);
    if (ids.empty()) {
      // Empty text: every frame blank.
      double s = 0;
      for (int t = 0; t < grid.rows(); ++t) s += grid.row(t)[vocab.blank_id()];
      return s;
    }
    return -CtcLoss(grid.ToTensor(), ids, vocab.blank_id());
  } catch (const CtcInfeasibleError&) {
    return kNegInf;
  } catch (const VocabError&) {
    return kNegInf;
  }
}

}  // namespace

double ScoredHypothesis::Final(const RescoreWeights& w) const {
  return beam + Term(w.w_lm, lm) + Term(w.w_char, neg_ctc_char) +
         Term(w.w_s300, neg_ctc_small) + Term(w.w_len, words);
}

std::vector<ScoredHypothesis> ScorePool(
    const std::vector<Hypothesis>& beam, int pool,
    const FrameRows& char_grid, const FrameRows& small_grid,
    const TokenizerSet& tokenizers, const NgramModel* lm) {
  std::vector<ScoredHypothesis> out;
  std::set<std::string> seen;
  const Vocabulary& top = tokenizers.at(Level::kSubLarge);
  const int n = std::min(pool, static_cast<int>(beam.size()));
  for (int i = 0; i < n; ++i) {
    ScoredHypothesis s;
    s.text = NormalizeText(top.Decode(beam[i].prefix));
    if (!seen.insert(s.text).second) continue;
    s.beam = beam[i].score();
    s.lm = lm != nullptr ? lm->ScoreText(s.text) : 0.0;
    s.neg_ctc_char = NegCtc(char_grid, tokenizers.at(Level::kChar), s.text);
    s.neg_ctc_small =
        NegCtc(small_grid, tokenizers.at(Level::kSubSmall), s.text);
    s.words = WordCount(s.text);
    out.push_back(std::move(s));
  }
  return out;
}

const ScoredHypothesis& PickBest(const std::vector<ScoredHypothesis>& pool,
                                 const RescoreWeights& w) {
  if (pool.empty()) throw std::invalid_argument("cannot rescore an empty pool");
  const ScoredHypothesis* best = &pool[0];
  double best_score = best->Final(w);
  for (size_t i = 1; i < pool.size(); ++i) {
    const double s = pool[i].Final(w);
    if (s > best_score || (s == best_score && pool[i].text < best->text)) {
      best = &pool[i];
      best_score = s;
    }
  }
  return *best;
}

int WordErrors(const std::string& ref, const std::string& hyp) {
  const auto r = Split(ref);
  const auto h = Split(hyp);
  std::vector<int> prev(h.size() + 1), cur(h.size() + 1);
  for (size_t j = 0; j <= h.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= r.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= h.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[h.size()];
}

int WordCount(const std::string& text) {
  return static_cast<int>(Split(text).size());
}

double CorpusWer(const std::vector<DevUtterance>& dev, const RescoreWeights& w) {
  int64_t errors = 0;
  int64_t words = 0;
  for (const auto& u : dev) {
    const std::string hyp = u.pool.empty() ? "" : PickBest(u.pool, w).text;
    errors += WordErrors(u.reference, hyp);
    words += WordCount(u.reference);
  }
  if (words == 0) return errors == 0 ? 0.0 : 1.0;
  return static_cast<double>(errors) / static_cast<double>(words);
}

GridSearchResult GridSearchWeights(const std::vector<DevUtterance>& dev,
                                   const WeightCandidates& candidates) {
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto lm = sorted(candidates.w_lm);
  const auto ch = sorted(candidates.w_char);
  const auto sm = sorted(candidates.w_s300);
  const auto ln = sorted(candidates.w_len);
  if (lm.empty() || ch.empty() || sm.empty() || ln.empty()) {
    throw std::invalid_argument("every weight axis needs at least one candidate");
  }
  GridSearchResult r;
  bool have = false;
  // Lexicographic visiting order plus strict improvement keeps the smallest
  // tuple among ties.
  for (double a : lm) {
    for (double b : ch) {
      for (double c : sm) {
        for (double d : ln) {
          const RescoreWeights w{a, b, c, d};
          const double wer = CorpusWer(dev, w);
          ++r.evaluated;
          if (!have || wer < r.wer) {
            r.best = w;
            r.wer = wer;
            have = true;
          }
        }
      }
    }
  }
  return r;
}

}  // namespace sasr

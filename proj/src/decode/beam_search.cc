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

#include "sasr/decode/beam_search.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct PrefixHash {
  size_t operator()(const std::vector<int>& v) const {
    uint64_t h = 1469598103934665603ull;
    for (int x : v) {
      h ^= static_cast<uint64_t>(x) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
  }
};

}  // namespace

double Hypothesis::score() const { return LogAdd(log_pb, log_pnb); }

bool HypothesisBefore(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.score();
  const double sb = b.score();
  if (sa != sb) return sa > sb;
  return a.prefix < b.prefix;
}

PrefixBeamSearch::PrefixBeamSearch(int blank, int eos, const DecodeConfig& cfg)
    : blank_(blank), eos_(eos), cfg_(cfg) {
  Hypothesis empty;
  empty.log_pb = 0;
  beam_.push_back(empty);
}

void PrefixBeamSearch::Step(const float* log_probs, int vocab) {
  // Symbols that may extend a prefix this frame.
  float frame_max = log_probs[0];
  for (int v = 1; v < vocab; ++v) frame_max = std::max(frame_max, log_probs[v]);
  std::vector<int> symbols;
  for (int v = 0; v < vocab; ++v) {
    if (v == blank_ || v == eos_) continue;
    if (log_probs[v] - frame_max < cfg_.prune_floor) continue;
    symbols.push_back(v);
  }
  if (cfg_.top_k > 0 && static_cast<int>(symbols.size()) > cfg_.top_k) {
    std::stable_sort(symbols.begin(), symbols.end(), [&](int a, int b) {
      return log_probs[a] > log_probs[b];
    });
    symbols.resize(cfg_.top_k);
  }
  double stay = log_probs[blank_];
  if (eos_ >= 0) stay = LogAdd(stay, log_probs[eos_]);

  std::unordered_map<std::vector<int>, Hypothesis, PrefixHash> next;
  next.reserve(beam_.size() * (symbols.size() + 1));
  auto slot = [&](const std::vector<int>& prefix) -> Hypothesis& {
    auto [it, inserted] = next.try_emplace(prefix);
    if (inserted) it->second.prefix = prefix;
    return it->second;
  };
  for (const Hypothesis& h : beam_) {
    const double total = h.score();
    Hypothesis& same = slot(h.prefix);
    same.log_pb = LogAdd(same.log_pb, total + stay);
    const int last = h.prefix.empty() ? -1 : h.prefix.back();
    for (int c : symbols) {
      const double p = log_probs[c];
      std::vector<int> ext = h.prefix;
      ext.push_back(c);
      Hypothesis& grown = slot(ext);
      if (c == last) {
        // A repeat only starts a new token after a blank.
        grown.log_pnb = LogAdd(grown.log_pnb, h.log_pb + p);
        Hypothesis& kept = slot(h.prefix);
        kept.log_pnb = LogAdd(kept.log_pnb, h.log_pnb + p);
      } else {
        grown.log_pnb = LogAdd(grown.log_pnb, total + p);
      }
    }
  }
  beam_.clear();
  beam_.reserve(next.size());
  for (auto& [prefix, h] : next) {
    if (h.score() != kNegInf) beam_.push_back(std::move(h));
  }
  const size_t keep = std::min(beam_.size(), static_cast<size_t>(cfg_.beam));
  std::partial_sort(beam_.begin(), beam_.begin() + keep, beam_.end(),
                    HypothesisBefore);
  beam_.resize(keep);
  ++frames_;
}

void PrefixBeamSearch::StepAll(const FrameRows& rows) {
  for (int t = 0; t < rows.rows(); ++t) Step(rows.row(t), rows.dim());
}

std::vector<Hypothesis> PrefixBeamDecode(const FrameRows& grid, int blank,
                                         int eos, const DecodeConfig& cfg) {
  if (grid.rows() == 0) throw std::invalid_argument("cannot decode an empty grid");
  PrefixBeamSearch search(blank, eos, cfg);
  search.StepAll(grid);
  return search.beam();
}

}  // namespace sasr

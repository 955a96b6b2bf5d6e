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

#include <cmath>
#include <random>

#include "grad_check.h"
#include "gtest/gtest.h"
#include "sasr/ctc/ctc.h"

namespace sasr {
namespace {

using testing::CheckGraphGradients;
using testing::RandomTensor;

TensorD RandomLogProbs(int frames, int vocab, std::mt19937_64* rng) {
  TensorD x = RandomTensor({frames, vocab}, rng, -3, 3);
  TensorD out({frames, vocab});
  for (int t = 0; t < frames; ++t) {
    double m = x.at(t, 0);
    for (int v = 1; v < vocab; ++v) m = std::max(m, x.at(t, v));
    double s = 0;
    for (int v = 0; v < vocab; ++v) s += std::exp(x.at(t, v) - m);
    for (int v = 0; v < vocab; ++v) out.at(t, v) = x.at(t, v) - m - std::log(s);
  }
  return out;
}

std::vector<int> Collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  for (size_t i = 0; i < path.size(); ++i) {
    if (path[i] == blank) continue;
    if (i > 0 && path[i] == path[i - 1]) continue;
    out.push_back(path[i]);
  }
  return out;
}

struct Enumerated {
  double total = 0;  // probability, not log
  double best = -INFINITY;
  int best_count = 0;
  int feasible = 0;
};

// Visits every length-T path over V symbols.
Enumerated Enumerate(const TensorD& logp, const std::vector<int>& labels,
                     int blank) {
  const int frames = logp.rows();
  const int vocab = logp.cols();
  Enumerated e;
  std::vector<int> path(frames, 0);
  while (true) {
    if (Collapse(path, blank) == labels) {
      double lp = 0;
      for (int t = 0; t < frames; ++t) lp += logp.at(t, path[t]);
      e.total += std::exp(lp);
      ++e.feasible;
      if (lp > e.best + 1e-12) {
        e.best = lp;
        e.best_count = 1;
      } else if (std::abs(lp - e.best) <= 1e-12) {
        ++e.best_count;
      }
    }
    int i = frames - 1;
    while (i >= 0 && ++path[i] == vocab) path[i--] = 0;
    if (i < 0) break;
  }
  return e;
}

TEST(CtcLossTest, TwoFrameUniformExample) {
  TensorD lp({2, 2}, std::log(0.5));
  // Vocabulary {a=0, blank=1}.
  EXPECT_NEAR(CtcLoss(lp, {0}, 1), -std::log(0.75), 1e-12);
  EXPECT_NEAR(CtcLoss(lp, {0}, 1), 0.287682, 1e-6);
}

TEST(CtcLossTest, CertainPathHasZeroLoss) {
  TensorD lp({3, 3}, -1e30);
  lp.at(0, 0) = 0;  // a
  lp.at(1, 2) = 0;  // blank
  lp.at(2, 1) = 0;  // b
  EXPECT_NEAR(CtcLoss(lp, {0, 1}, 2), 0.0, 1e-12);
}

TEST(CtcLossTest, RepeatsNeedABlank) {
  TensorD lp({2, 2}, std::log(0.5));
  EXPECT_THROW(CtcLoss(lp, {0, 0}, 1), CtcInfeasibleError);
  TensorD lp3({3, 2}, std::log(0.5));
  EXPECT_NO_THROW(CtcLoss(lp3, {0, 0}, 1));
  EXPECT_EQ(CtcMinFrames({0, 0, 1, 1}), 6);
}

TEST(CtcLossTest, BadArguments) {
  TensorD lp({3, 3});
  EXPECT_THROW(CtcLoss(lp, {}, 2), std::invalid_argument);
  EXPECT_THROW(CtcLoss(lp, {2}, 2), std::invalid_argument);
  EXPECT_THROW(CtcLoss(lp, {5}, 2), std::invalid_argument);
}

TEST(CtcLossTest, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(1);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int frames = std::uniform_int_distribution<int>(1, 6)(rng);
    const int vocab = std::uniform_int_distribution<int>(2, 4)(rng);
    const int blank = std::uniform_int_distribution<int>(0, vocab - 1)(rng);
    const int len = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> labels;
    for (int i = 0; i < len; ++i) {
      int l = std::uniform_int_distribution<int>(0, vocab - 2)(rng);
      labels.push_back(l >= blank ? l + 1 : l);
    }
    TensorD lp = RandomLogProbs(frames, vocab, &rng);
    if (CtcMinFrames(labels) > frames) {
      EXPECT_THROW(CtcLoss(lp, labels, blank), CtcInfeasibleError);
      continue;
    }
    const Enumerated e = Enumerate(lp, labels, blank);
    EXPECT_NEAR(CtcLoss(lp, labels, blank), -std::log(e.total), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 150);
}

TEST(CtcLossTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    NodeId x = g.Input("x");
    NodeId lp = g.LogSoftmax(x);
    g.SetOutput("loss", g.Custom(MakeCtcOp({1, 2, 2}, 0), {lp}));
    TensorMap<double> in;
    in.emplace("x", RandomTensor({7, 4}, &rng, -2, 2));
    auto r = CheckGraphGradients(g, in, {}, "loss");
    EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
  }
}

TEST(Entropy, Examples) {
  TensorD uniform4({1, 4}, std::log(0.25));
  EXPECT_NEAR(EntropyTerm(uniform4), std::log(4.0), 1e-12);
  TensorD one_hot({1, 3}, -INFINITY);
  one_hot.at(0, 1) = 0;
  EXPECT_EQ(EntropyTerm(one_hot), 0.0);
  TensorD two({2, 2}, std::log(0.5));
  EXPECT_NEAR(EntropyTerm(two), 2 * std::log(2.0), 1e-12);
}

TEST(Entropy, GraphFormMatches) {
  std::mt19937_64 rng(3);
  TensorD lp = RandomLogProbs(5, 4, &rng);
  Graph g;
  g.SetOutput("h", AddEntropy(&g, g.Input("lp")));
  TensorMap<double> in;
  in.emplace("lp", lp);
  auto e = Evaluate<double>(g, in, {});
  EXPECT_NEAR(e.output("h")[0], EntropyTerm(lp), 1e-12);
}

struct HctcCase {
  std::vector<TensorD> grids;
  std::vector<std::vector<int>> targets = {{1, 2}, {1}, {2}};
  std::vector<int> blanks = {0, 0, 0};
};

HctcCase MakeCase(std::mt19937_64* rng) {
  HctcCase c;
  c.grids = {RandomLogProbs(6, 4, rng), RandomLogProbs(6, 3, rng),
             RandomLogProbs(2, 3, rng)};
  return c;
}

double GraphHctc(const HctcCase& c, const HctcConfig& cfg) {
  Graph g;
  std::vector<NodeId> lp;
  for (int k = 0; k < 3; ++k) lp.push_back(g.Input("lp" + std::to_string(k)));
  AddHctcLoss(&g, lp, lp, c.targets, c.blanks, cfg);
  TensorMap<double> in;
  for (int k = 0; k < 3; ++k) in.emplace("lp" + std::to_string(k), c.grids[k]);
  return Evaluate<double>(g, in, {}).output("loss")[0];
}

TEST(Hctc, ZeroLambdaIsSumOfCtcBitwise) {
  std::mt19937_64 rng(4);
  HctcCase c = MakeCase(&rng);
  HctcConfig cfg;
  cfg.entropy_weight = 0;
  const double sum = CtcLoss(c.grids[0], c.targets[0], 0) +
                     CtcLoss(c.grids[1], c.targets[1], 0) +
                     CtcLoss(c.grids[2], c.targets[2], 0);
  EXPECT_EQ(HctcLoss(c.grids, c.targets, c.blanks, cfg), sum);
  EXPECT_EQ(GraphHctc(c, cfg), sum);
}

TEST(Hctc, LevelMaskSelectsFirstLevel) {
  std::mt19937_64 rng(5);
  HctcCase c = MakeCase(&rng);
  HctcConfig cfg;
  cfg.level_weights = {1, 0, 0};
  const double expect = CtcLoss(c.grids[0], c.targets[0], 0) -
                        cfg.entropy_weight * EntropyTerm(c.grids[0]);
  EXPECT_NEAR(HctcLoss(c.grids, c.targets, c.blanks, cfg), expect, 1e-12);
  EXPECT_NEAR(GraphHctc(c, cfg), expect, 1e-12);
}

TEST(Hctc, UniformGridsLoseLambdaTLogV) {
  HctcCase c;
  c.grids = {TensorD({6, 4}, std::log(0.25)), TensorD({6, 3}, std::log(1 / 3.0)),
             TensorD({2, 3}, std::log(1 / 3.0))};
  HctcConfig off;
  off.entropy_weight = 0;
  HctcConfig on;
  on.entropy_weight = 0.3;
  const double drop = 0.3 * (6 * std::log(4.0) + 6 * std::log(3.0) +
                             2 * std::log(3.0));
  EXPECT_NEAR(HctcLoss(c.grids, c.targets, c.blanks, off) -
                  HctcLoss(c.grids, c.targets, c.blanks, on),
              drop, 1e-9);
  EXPECT_NEAR(GraphHctc(c, off) - GraphHctc(c, on), drop, 1e-9);
}

TEST(Hctc, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  Graph g;
  std::vector<NodeId> lp;
  for (int k = 0; k < 3; ++k) {
    lp.push_back(g.LogSoftmax(g.Input("x" + std::to_string(k))));
  }
  HctcConfig cfg;
  cfg.entropy_weight = 0.05;
  AddHctcLoss(&g, lp, lp, {{1, 2}, {1}, {2}}, {0, 0, 0}, cfg);
  TensorMap<double> in;
  in.emplace("x0", RandomTensor({6, 4}, &rng));
  in.emplace("x1", RandomTensor({6, 3}, &rng));
  in.emplace("x2", RandomTensor({3, 3}, &rng));
  auto r = CheckGraphGradients(g, in, {}, "loss");
  EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
}

TEST(ForcedAlignTest, CertainPath) {
  // Labels "ab" with a=0, b=1, blank=2; the path a, blank, b ends at frame 2.
  TensorF lp({3, 3}, -1e30f);
  lp.at(0, 0) = 0;
  lp.at(1, 2) = 0;
  lp.at(2, 1) = 0;
  AlignmentResult r = ForcedAlign(lp, {0, 1}, 2);
  EXPECT_EQ(r.path, (std::vector<int>{0, 2, 1}));
  EXPECT_EQ(r.endpoint_frame, 2);
  EXPECT_EQ(r.endpoint_ms, 90);
}

TEST(ForcedAlignTest, UniformTiesPickEarliestNonBlank) {
  TensorF lp({3, 2}, std::log(0.5f));
  AlignmentResult r = ForcedAlign(lp, {0}, 1);
  EXPECT_EQ(r.endpoint_frame, 0);
  EXPECT_EQ(r.path, (std::vector<int>{0, 1, 1}));
}

TEST(ForcedAlignTest, ViterbiAgainstEnumeration) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int frames = std::uniform_int_distribution<int>(2, 6)(rng);
    const int vocab = std::uniform_int_distribution<int>(2, 4)(rng);
    std::vector<int> labels;
    const int len = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < len; ++i) {
      labels.push_back(std::uniform_int_distribution<int>(1, vocab - 1)(rng));
    }
    if (CtcMinFrames(labels) > frames) continue;
    TensorD lpd = RandomLogProbs(frames, vocab, &rng);
    TensorF lp = lpd.Cast<float>();
    const TensorD lp_back = lp.Cast<double>();
    const Enumerated e = Enumerate(lp_back, labels, 0);
    AlignmentResult r = ForcedAlign(lp, labels, 0);
    EXPECT_EQ(Collapse(r.path, 0), labels);
    EXPECT_NEAR(r.path_log_prob, e.best, 1e-9);
    const double total = -CtcLoss(lp_back, labels, 0);
    EXPECT_LE(r.path_log_prob, total + 1e-12);
    if (e.feasible == 1) {
      EXPECT_NEAR(r.path_log_prob, total, 1e-9);
    } else {
      EXPECT_LT(r.path_log_prob, total);
    }
  }
}

TEST(ForcedAlignTest, InfeasibleLabels) {
  TensorF lp({2, 2}, std::log(0.5f));
  EXPECT_THROW(ForcedAlign(lp, {0, 0}, 1), CtcInfeasibleError);
}

TEST(ElPenalty, Examples) {
  ElPenaltyConfig cfg;
  TensorF pen = ElPenaltyMatrix(30, 4, 3, 10, cfg);
  EXPECT_FLOAT_EQ(pen.at(0, 3), -0.5f);
  EXPECT_EQ(pen.at(10, 3), 0.f);
  EXPECT_FLOAT_EQ(pen.at(25, 3), -0.5f);
  for (int t = 5; t <= 20; ++t) EXPECT_EQ(pen.at(t, 3), 0.f) << t;
  for (int t = 0; t < 30; ++t) {
    for (int v = 0; v < 3; ++v) EXPECT_EQ(pen.at(t, v), 0.f);
  }
  ElPenaltyConfig zero;
  zero.w_early = 0;
  zero.w_late = 0;
  std::mt19937_64 rng(8);
  TensorF lp = RandomLogProbs(12, 4, &rng).Cast<float>();
  TensorF aug = lp;
  ElAugment(&aug, 3, 4, zero);
  EXPECT_TRUE(aug == lp);
  EXPECT_THROW(ElPenaltyMatrix(3, 4, 4, 1, cfg), std::invalid_argument);
}

TEST(AlignmentDump, RunLengthLine) {
  AlignmentResult r;
  r.path = {0, 0, 3, 0, 2, 2};
  r.endpoint_ms = 180;
  EXPECT_EQ(AlignmentLine("utt1", r), "utt1 180 0:2 3:1 0:1 2:2");
}

}  // namespace
}  // namespace sasr

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
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "sasr/endpoint/eos.h"
#include "sasr/endpoint/session.h"

namespace sasr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Row over vocab {blank, a, b, </s>} with the given probabilities.
std::vector<float> Row(std::vector<double> probs) {
  std::vector<float> r;
  for (double p : probs) r.push_back(static_cast<float>(std::log(p)));
  return r;
}

TEST(EosThresholdTest, ExponentGrowsWithPeaks) {
  for (int n = 0; n < 4; ++n) {
    EXPECT_NEAR(EosThreshold(0.8, 2.0, n), std::pow(0.8, 1.0 + n / 2.0), 1e-15);
  }
  EXPECT_NEAR(EosThreshold(0.8, 2.0, 2), 0.64, 1e-12);
  EXPECT_DOUBLE_EQ(EosThreshold(1.0, 3.0, 7), 1.0);
}

TEST(EosStepTest, EmptyTextNeverFires) {
  EosState s;
  EosConfig c;
  EXPECT_FALSE(EosStep(&s, Row({0.005, 0.0025, 0.0025, 0.99}), 3, "", c));
  EXPECT_EQ(s.n, 1);
  EXPECT_FALSE(s.fired);
}

TEST(EosStepTest, PeakAboveThresholdFires) {
  EosState s;
  EosConfig c;
  EXPECT_TRUE(EosStep(&s, Row({0.05, 0.05, 0.05, 0.85}), 3, "red", c));
  EXPECT_EQ(s.decision_frame, 0);
}

TEST(EosStepTest, NoPeakLeavesCountAlone) {
  EosState s;
  EosConfig c;
  EXPECT_FALSE(EosStep(&s, Row({0.04, 0.75, 0.01, 0.2}), 3, "red", c));
  // Not normalized, but only the ordering and the eos value matter here.
  EXPECT_FALSE(EosStep(&s, Row({0.01, 0.75, 0.01, 0.7}), 3, "red", c));
  EXPECT_EQ(s.n, 0);
}

TEST(EosStepTest, ThresholdUsesPeaksBeforeTheRow) {
  EosConfig c;
  c.alpha = 0.8;
  c.beta = 1.0;
  EosState s;
  // A peak at 0.7 < 0.8 does not fire but raises the count to 1, so the
  // next threshold is 0.64.
  EXPECT_FALSE(EosStep(&s, Row({0.1, 0.1, 0.1, 0.7}), 3, "", c));
  EXPECT_EQ(s.n, 1);
  EXPECT_TRUE(EosStep(&s, Row({0.1, 0.1, 0.15, 0.65}), 3, "a", c));
  EXPECT_EQ(s.decision_frame, 1);
}

TEST(EosStepTest, FiredIsSticky) {
  EosState s;
  EosConfig c;
  ASSERT_TRUE(EosStep(&s, Row({0.05, 0.05, 0.05, 0.85}), 3, "red", c));
  for (int i = 0; i < 5; ++i) {
    EXPECT_TRUE(EosStep(&s, Row({0.9, 0.05, 0.04, 0.01}), 3, "", c));
  }
  EXPECT_EQ(s.decision_frame, 0);
  EXPECT_EQ(s.frames, 6);
}

TEST(EosConfigTest, RejectsBadParameters) {
  EosConfig c;
  c.alpha = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c.alpha = 1.2;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c.alpha = 0.5;
  c.beta = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

struct RandomUtterance {
  std::vector<std::vector<float>> rows;
  std::vector<std::string> texts;
};

// Posteriors with frequent </s> peaks of varying height and texts that
// become non-empty part way through.
RandomUtterance MakeUtterance(std::mt19937_64* rng) {
  RandomUtterance u;
  std::uniform_real_distribution<double> unif(0, 1);
  const int t = std::uniform_int_distribution<int>(1, 40)(*rng);
  const int speech = std::uniform_int_distribution<int>(0, t)(*rng);
  for (int i = 0; i < t; ++i) {
    std::vector<double> p(4);
    for (auto& x : p) x = unif(*rng) + 1e-3;
    if (unif(*rng) < 0.5) p[3] *= 6;
    double z = p[0] + p[1] + p[2] + p[3];
    for (auto& x : p) x /= z;
    u.rows.push_back(Row(p));
    u.texts.push_back(i >= speech ? "red" : "");
  }
  return u;
}

int FiringFrame(const RandomUtterance& u, double alpha, double beta) {
  EosConfig c;
  c.alpha = alpha;
  c.beta = beta;
  EosState s;
  for (size_t i = 0; i < u.rows.size(); ++i) EosStep(&s, u.rows[i], 3, u.texts[i], c);
  return s.fired ? s.decision_frame : std::numeric_limits<int>::max();
}

TEST(EosProperties, FiringFrameMonotoneInAlphaAndBeta) {
  std::mt19937_64 rng(11);
  const std::vector<double> alphas = {0.05, 0.2, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0};
  const std::vector<double> betas = {0.25, 0.5, 1, 2, 4, 8, 1e9};
  int fired = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const RandomUtterance u = MakeUtterance(&rng);
    for (double b : betas) {
      int prev = -1;
      for (double a : alphas) {
        const int f = FiringFrame(u, a, b);
        EXPECT_GE(f, prev) << "alpha " << a << " beta " << b;
        prev = f;
        fired += f != std::numeric_limits<int>::max();
      }
    }
    for (double a : alphas) {
      if (a == 1.0) continue;
      int prev = -1;
      for (double b : betas) {
        const int f = FiringFrame(u, a, b);
        EXPECT_GE(f, prev) << "alpha " << a << " beta " << b;
        prev = f;
      }
    }
  }
  EXPECT_GT(fired, 1000);
}

TEST(EosProperties, PeakTermNeverDelays) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const RandomUtterance u = MakeUtterance(&rng);
    for (double a : {0.3, 0.6, 0.8, 0.9}) {
      for (double b : {0.5, 1.0, 2.0, 4.0}) {
        // beta -> infinity freezes the threshold at alpha.
        EXPECT_LE(FiringFrame(u, a, b), FiringFrame(u, a, kInf));
      }
    }
  }
}

TEST(VadBackupTest, SilenceFiresAfterMinimumSilence) {
  EosConfig c;
  c.vad_no_speech_ms = c.vad_min_silence_ms;
  VadBackup vad(c);
  while (!vad.Step(0.0)) {
  }
  EXPECT_EQ(vad.position_ms(), 810);
  EXPECT_EQ(vad.source(), DecisionSource::kVad);
}

TEST(VadBackupTest, LeadingSilenceUsesNoSpeechLimit) {
  EosConfig c;
  VadBackup pure(c);
  while (!pure.Step(0.0)) {
  }
  EXPECT_EQ(pure.position_ms(), 5010);
  EXPECT_EQ(pure.source(), DecisionSource::kVad);

  // 990 ms lead, 300 ms speech, then the 800 ms rule.
  VadBackup vad(c);
  for (int i = 0; i < 33; ++i) EXPECT_FALSE(vad.Step(0.0));
  for (int i = 0; i < 10; ++i) EXPECT_FALSE(vad.Step(0.01));
  while (!vad.Step(0.0)) {
  }
  EXPECT_EQ(vad.position_ms(), 1290 + 810);
}

TEST(VadBackupTest, LoudToneFiresAtMaxTime) {
  EosConfig c;
  VadBackup vad(c);
  while (!vad.Step(0.1)) {
  }
  EXPECT_EQ(vad.position_ms(), 15000);
  EXPECT_EQ(vad.source(), DecisionSource::kMaxTime);
}

TEST(VadBackupTest, ZeroThresholdNeverEnergyFires) {
  EosConfig c;
  c.vad_energy_threshold = 0;
  VadBackup vad(c);
  while (!vad.Step(0.0)) {
  }
  EXPECT_EQ(vad.source(), DecisionSource::kMaxTime);
}

TEST(VadBackupTest, SpeechResetsTheSilenceRun) {
  EosConfig c;
  VadBackup vad(c);
  for (int i = 0; i < 20; ++i) EXPECT_FALSE(vad.Step(0.0));
  EXPECT_FALSE(vad.Step(0.5));
  for (int i = 0; i < 26; ++i) EXPECT_FALSE(vad.Step(0.0));
  EXPECT_TRUE(vad.Step(0.0));
}

TEST(FrameEnergyTest, MeanSquare) {
  const std::vector<float> x = {1, -1, 0.5f, -0.5f};
  EXPECT_DOUBLE_EQ(FrameEnergy(x), 0.625);
  EXPECT_EQ(FrameEnergy({}), 0.0);
}

class SessionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const std::vector<std::string> corpus = {"red shoes", "blue hat", "red hat now"};
    tok_.levels[0] = BuildCharVocab(corpus);
    tok_.levels[1] = TrainBpe(corpus, 20, Level::kSubSmall).vocab;
    tok_.levels[2] = TrainBpe(corpus, 26, Level::kSubLarge).vocab;
    ModelConfig c;
    c.hidden = 24;
    c.heads = 2;
    c.head_dim = 8;
    c.layers = {1, 1, 1};
    for (int k = 0; k < 3; ++k) c.vocab[k] = tok_.levels[k].size();
    model_ = Model::Build(c, 3);
    // Sharpen the top head and favour </s> so the detector has real peaks.
    TensorF& w = model_.mutable_params().at("head3.w");
    for (float& v : w.values()) v *= 25;
    TensorF& b = model_.mutable_params().at("head3.b");
    b.values()[tok_.levels[2].eos_id()] += 1.5f;
    lm_ = NgramModel::Train(corpus, 2);
    rec_.model = &model_;
    rec_.tokenizers = &tok_;
    rec_.lm = &lm_;
    rec_.decode.beam = 16;
    rec_.decode.pool = 8;
    rec_.weights = {0.3, 0.2, 0.1, 0.5};
  }

  static Waveform Audio(uint64_t seed, int ms, int silence_ms) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> d(0.f, 0.2f);
    Waveform w;
    w.samples.resize(static_cast<size_t>(ms + silence_ms) * 16);
    for (size_t i = 0; i < static_cast<size_t>(ms) * 16; ++i) w.samples[i] = d(rng);
    return w;
  }

  TokenizerSet tok_;
  Model model_;
  NgramModel lm_;
  Recognizer rec_;
};

TEST_F(SessionTest, EosOffMatchesBatchDecode) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 4; ++trial) {
    Waveform w = Audio(trial, 900 + 350 * trial, 300);
    SessionOptions o;
    o.mode = EosMode::kOff;
    o.chunk_ms = 100 + 110 * trial;
    int interims = 0;
    o.on_interim = [&](int, const std::string&) { ++interims; };
    SessionResult r = RunSession(w, rec_, o);
    EXPECT_EQ(r.source, DecisionSource::kStreamEnd);
    EXPECT_EQ(r.decision_ms, r.stream_ms);
    EXPECT_EQ(r.text, BatchTranscribe(w, rec_));
    EXPECT_EQ(interims, (r.stream_ms + o.chunk_ms - 1) / o.chunk_ms);
  }
}

TEST_F(SessionTest, SilenceOnlyFallsBackToVad) {
  Waveform w;
  w.samples.assign(16000 * 6, 0.f);
  SessionOptions o;
  SessionResult r = RunSession(w, rec_, o);
  EXPECT_EQ(r.source, DecisionSource::kVad);
  EXPECT_EQ(r.decision_ms, 5010);
}

TEST_F(SessionTest, ReplayMatchesLiveSessions) {
  std::mt19937_64 rng(2);
  int model_fires = 0;
  int vad_fires = 0;
  const int eos_id = tok_.levels[2].eos_id();
  for (int trial = 0; trial < 5; ++trial) {
    Waveform w = Audio(100 + trial, 1000 + 400 * trial, 600 + 200 * trial);
    EosConfig base;
    const SessionTrace trace = TraceSession(w, rec_, base);
    for (double a : {0.3, 0.6, 0.8, 0.95}) {
      for (double b : {1.0, 2.0, 4.0}) {
        SessionOptions o;
        o.eos.alpha = a;
        o.eos.beta = b;
        const SessionResult live = RunSession(w, rec_, o);
        const SessionResult replay =
            ResolveSession(trace, rec_.weights, EosMode::kOn, o.eos, eos_id);
        EXPECT_EQ(live.text, replay.text);
        EXPECT_EQ(live.source, replay.source);
        EXPECT_EQ(live.decision_ms, replay.decision_ms);
        EXPECT_EQ(live.decision_row, replay.decision_row);
        model_fires += live.source == DecisionSource::kModel;
        vad_fires += live.source == DecisionSource::kVad;
      }
    }
    const SessionResult off =
        ResolveSession(trace, rec_.weights, EosMode::kOff, base, eos_id);
    EXPECT_EQ(off.text, BatchTranscribe(w, rec_));
  }
  EXPECT_GT(model_fires, 0);
  EXPECT_GT(vad_fires, 0);
}

TEST_F(SessionTest, ModelDecisionCountsConsumedFrames) {
  Waveform w = Audio(7, 2500, 0);
  SessionOptions o;
  o.eos.alpha = 0.05;
  SessionResult r = RunSession(w, rec_, o);
  ASSERT_EQ(r.source, DecisionSource::kModel);
  // Row u of the top level needs stacked frames up to 3u + 14.
  EXPECT_EQ(r.decision_ms, (3 * r.decision_row + 15) * 30);
}

TEST_F(SessionTest, VocabularyMismatchIsRejected) {
  TokenizerSet other = tok_;
  other.levels[2] = TrainBpe({"red shoes", "blue hat", "red hat now"}, 22,
                             Level::kSubLarge).vocab;
  Recognizer bad = rec_;
  bad.tokenizers = &other;
  EXPECT_THROW(RunSession(Audio(1, 500, 0), bad, SessionOptions()),
               std::invalid_argument);
}

}  // namespace
}  // namespace sasr

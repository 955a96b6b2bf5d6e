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

#ifndef SASR_ENDPOINT_EOS_H_
#define SASR_ENDPOINT_EOS_H_

#include <span>
#include <string>

namespace sasr {

enum class DecisionSource { kModel, kVad, kMaxTime, kStreamEnd };

const char* DecisionSourceName(DecisionSource s);

struct EosConfig {
  double alpha = 0.8;
  double beta = 2.0;
  double vad_energy_threshold = 1e-4;
  int vad_min_silence_ms = 800;
  // Silence allowed before the first speech frame.
  int vad_no_speech_ms = 5000;
  int max_utterance_ms = 15000;
  // Throws std::invalid_argument unless 0 < alpha <= 1 and beta > 0.
  void Validate() const;
};

// alpha^(1 + n / beta).
double EosThreshold(double alpha, double beta, int n);

struct EosState {
  int n = 0;  // peaks seen so far
  bool fired = false;
  int decision_frame = -1;
  int frames = 0;  // rows consumed
};

// True when </s> is at least as likely as every other token in the row.
bool IsEosPeak(std::span<const float> log_probs, int eos_id);

// One detector step on a top-level posterior row. The threshold uses the
// peak count before this row; a peak here increments it afterwards. Returns
// whether the detector has fired (now or earlier).
bool EosStep(EosState* state, std::span<const float> log_probs, int eos_id,
             const std::string& best_text, const EosConfig& cfg);

// Energy VAD and time-limit backup over consecutive 30 ms frames. Silence
// counts against vad_min_silence_ms once a speech frame has been seen and
// against vad_no_speech_ms before that.
class VadBackup {
 public:
  static constexpr int kFrameMs = 30;
  static constexpr int kFrameSamples = 480;

  explicit VadBackup(const EosConfig& cfg) : cfg_(cfg) {}

  // Feeds the mean squared amplitude of the next frame.
  bool Step(double energy);

  bool fired() const { return fired_; }
  DecisionSource source() const { return source_; }
  int position_ms() const { return frames_ * kFrameMs; }

 private:
  EosConfig cfg_;
  int frames_ = 0;
  int silent_ms_ = 0;
  bool heard_speech_ = false;
  bool fired_ = false;
  DecisionSource source_ = DecisionSource::kVad;
};

double FrameEnergy(std::span<const float> samples);

}  // namespace sasr

#endif  // SASR_ENDPOINT_EOS_H_

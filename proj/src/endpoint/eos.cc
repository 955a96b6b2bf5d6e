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

#include "sasr/endpoint/eos.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sasr {

const char* DecisionSourceName(DecisionSource s) {
  switch (s) {
    case DecisionSource::kModel:
      return "model";
    case DecisionSource::kVad:
      return "vad";
    case DecisionSource::kMaxTime:
      return "max_time";
    case DecisionSource::kStreamEnd:
      return "stream_end";
  }
  return "?";
}

void EosConfig::Validate() const {
  if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(beta > 0)) throw std::invalid_argument("beta must be > 0");
}

double EosThreshold(double alpha, double beta, int n) {
  return std::pow(alpha, 1.0 + n / beta);
}

bool IsEosPeak(std::span<const float> log_probs, int eos_id) {
  const float p = log_probs[eos_id];
  for (float v : log_probs) {
    if (v > p) return false;
  }
  return true;
}

bool EosStep(EosState* state, std::span<const float> log_probs, int eos_id,
             const std::string& best_text, const EosConfig& cfg) {
  const int t = state->frames++;
  if (state->fired) return true;
  const bool peak = IsEosPeak(log_probs, eos_id);
  std::istringstream words(best_text);
  std::string w;
  const bool has_word = static_cast<bool>(words >> w);
  const double p = std::exp(static_cast<double>(log_probs[eos_id]));
  if (has_word && peak && p >= EosThreshold(cfg.alpha, cfg.beta, state->n)) {
    state->fired = true;
    state->decision_frame = t;
  }
  if (peak) ++state->n;
  return state->fired;
}

bool VadBackup::Step(double energy) {
  ++frames_;
  if (fired_) return true;
  const bool silent = energy < cfg_.vad_energy_threshold;
  if (!silent) heard_speech_ = true;
  silent_ms_ = silent ? silent_ms_ + kFrameMs : 0;
  const int limit =
      heard_speech_ ? cfg_.vad_min_silence_ms : cfg_.vad_no_speech_ms;
  if (silent && silent_ms_ >= limit) {
    fired_ = true;
    source_ = DecisionSource::kVad;
  } else if (position_ms() >= cfg_.max_utterance_ms) {
    fired_ = true;
    source_ = DecisionSource::kMaxTime;
  }
  return fired_;
}

double FrameEnergy(std::span<const float> samples) {
  if (samples.empty()) return 0;
  double s = 0;
  for (float x : samples) s += static_cast<double>(x) * x;
  return s / static_cast<double>(samples.size());
}

}  // namespace sasr

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

#ifndef SASR_FRONTEND_WAV_H_
#define SASR_FRONTEND_WAV_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace sasr {

inline constexpr int kSampleRate = 16000;

// Mono audio with samples in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate;
  }
};

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// RIFF/WAVE, PCM 16-bit mono only. Samples are scaled by 1/32768 so that
// reading back a written file reproduces the quantized samples exactly.
Waveform ReadWav(const std::string& path);
void WriteWav(const std::string& path, const Waveform& wave);

// Quantizes to 16-bit the same way WriteWav does.
float QuantizePcm16(float x);

}  // namespace sasr

#endif  // SASR_FRONTEND_WAV_H_

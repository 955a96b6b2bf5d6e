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

#ifndef SASR_FRONTEND_FEATURES_H_
#define SASR_FRONTEND_FEATURES_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sasr/diffkern/frame_rows.h"
#include "sasr/diffkern/tensor.h"
#include "sasr/frontend/wav.h"

namespace sasr {

struct MelConfig {
  int sample_rate = kSampleRate;
  int window = 320;  // 20 ms
  int hop = 160;     // 10 ms
  int fft_size = 512;
  int num_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
};

// Stacking of base frames into model input frames.
inline constexpr int kStackFrames = 5;
inline constexpr int kStackStride = 3;
inline constexpr int kFrameStrideMs = 30;

// Number of base frames for a given sample count (0 when too short).
int BaseFrameCount(int64_t num_samples, const MelConfig& cfg = {});
// Number of stacked frames for a given base frame count (0 when too short).
int StackedFrameCount(int base_frames);

// Log-mel filterbank with a Hann window. Thread-safe after construction.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(MelConfig cfg = {});
  ~LogMelExtractor();
  LogMelExtractor(const LogMelExtractor&) = delete;
  LogMelExtractor& operator=(const LogMelExtractor&) = delete;

  const MelConfig& config() const { return cfg_; }

  // Base frame matrix, T_base x num_mels. Throws AudioError for a sample
  // rate other than the configured one or audio shorter than one window.
  TensorF Compute(const Waveform& wave) const;

  // Log-mel vector of the window starting at samples[0].
  void ComputeFrame(const float* samples, float* out) const;

  // Center frequency (Hz) of each mel filter.
  std::vector<double> CenterFrequencies() const;

 private:
  struct Impl;
  MelConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

// Row t is the concatenation of base rows 3t .. 3t+4.
TensorF StackFrames(const TensorF& base);

struct SpecAugmentConfig {
  int time_masks = 2;
  int max_time_width = 20;  // base frames
  int freq_masks = 2;
  int max_freq_width = 15;  // mel bins
  // When false every mask has exactly its max width (clamped to the axis).
  bool random_width = true;
};

// Time/frequency masking of the base (pre-stacking) frames. Masked cells
// take the utterance mean. Deterministic for a given seed.
TensorF SpecAugment(const TensorF& base, const SpecAugmentConfig& cfg,
                    uint64_t seed);

// Incremental log-mel + stacking. Pushing any split of a waveform yields the
// same rows, in order, as StackFrames(Compute(whole waveform)).
class StreamingFeaturizer {
 public:
  explicit StreamingFeaturizer(const LogMelExtractor& mel);

  // Returns newly completed stacked frames (possibly none).
  FrameRows Push(std::span<const float> samples);

  int64_t samples_seen() const { return samples_seen_; }
  int stacked_emitted() const { return stacked_emitted_; }

 private:
  const LogMelExtractor& mel_;
  std::vector<float> pending_;  // samples from the next base window onward
  int64_t pending_start_ = 0;   // absolute index of pending_[0]
  int64_t samples_seen_ = 0;
  FrameRows base_;  // base frames not yet fully consumed by stacking
  int base_start_ = 0;
  int base_total_ = 0;
  int stacked_emitted_ = 0;
};

}  // namespace sasr

#endif  // SASR_FRONTEND_FEATURES_H_

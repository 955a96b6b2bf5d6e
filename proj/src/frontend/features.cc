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

#include "sasr/frontend/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

namespace sasr {

namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

int BaseFrameCount(int64_t num_samples, const MelConfig& cfg) {
  if (num_samples < cfg.window) return 0;
  return static_cast<int>((num_samples - cfg.window) / cfg.hop) + 1;
}

int StackedFrameCount(int base_frames) {
  if (base_frames < kStackFrames) return 0;
  return (base_frames - kStackFrames) / kStackStride + 1;
}

struct LogMelExtractor::Impl {
  fftw_plan plan = nullptr;
  std::vector<double> window;
  // filters[m] = (first bin, weights...)
  std::vector<int> first_bin;
  std::vector<std::vector<double>> weights;
  std::vector<double> centers;
};

LogMelExtractor::LogMelExtractor(MelConfig cfg)
    : cfg_(cfg), impl_(std::make_unique<Impl>()) {
  const int n = cfg_.fft_size;
  if (cfg_.window > n) throw std::invalid_argument("window exceeds FFT size");
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    impl_->plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  impl_->window.resize(cfg_.window);
  for (int i = 0; i < cfg_.window; ++i) {
    impl_->window[i] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg_.window);
  }
  const int bins = n / 2 + 1;
  const double lo = HzToMel(cfg_.fmin);
  const double hi = HzToMel(cfg_.fmax);
  std::vector<double> edges(cfg_.num_mels + 2);
  for (int i = 0; i < cfg_.num_mels + 2; ++i) {
    edges[i] = MelToHz(lo + (hi - lo) * i / (cfg_.num_mels + 1));
  }
  impl_->first_bin.resize(cfg_.num_mels);
  impl_->weights.resize(cfg_.num_mels);
  impl_->centers.resize(cfg_.num_mels);
  for (int m = 0; m < cfg_.num_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    impl_->centers[m] = center;
    int first = -1;
    std::vector<double> w;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg_.sample_rate / n;
      double v = 0;
      if (f > left && f <= center) {
        v = (f - left) / (center - left);
      } else if (f > center && f < right) {
        v = (right - f) / (right - center);
      }
      if (v > 0) {
        if (first < 0) first = k;
        w.resize(k - first + 1, 0.0);
        w[k - first] = v;
      }
    }
    impl_->first_bin[m] = std::max(first, 0);
    impl_->weights[m] = std::move(w);
  }
}

LogMelExtractor::~LogMelExtractor() {
  if (impl_ && impl_->plan != nullptr) {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(impl_->plan);
  }
}

std::vector<double> LogMelExtractor::CenterFrequencies() const {
  return impl_->centers;
}

void LogMelExtractor::ComputeFrame(const float* samples, float* out) const {
  const int n = cfg_.fft_size;
  const int bins = n / 2 + 1;
  double* in = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(bins);
  for (int i = 0; i < cfg_.window; ++i) in[i] = samples[i] * impl_->window[i];
  std::fill(in + cfg_.window, in + n, 0.0);
  fftw_execute_dft_r2c(impl_->plan, in, spec);
  std::vector<double> power(bins);
  for (int k = 0; k < bins; ++k) {
    power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
  }
  fftw_free(in);
  fftw_free(spec);
  for (int m = 0; m < cfg_.num_mels; ++m) {
    double e = 0;
    const auto& w = impl_->weights[m];
    const int first = impl_->first_bin[m];
    for (size_t j = 0; j < w.size(); ++j) e += w[j] * power[first + j];
    out[m] = static_cast<float>(std::log(e + cfg_.log_floor));
  }
}

TensorF LogMelExtractor::Compute(const Waveform& wave) const {
  if (wave.sample_rate != cfg_.sample_rate) {
    throw AudioError("sample rate " + std::to_string(wave.sample_rate) +
                     " Hz is not supported, expected " +
                     std::to_string(cfg_.sample_rate) + " Hz");
  }
  const int frames =
      BaseFrameCount(static_cast<int64_t>(wave.samples.size()), cfg_);
  if (frames == 0) {
    throw AudioError("audio of " + std::to_string(wave.samples.size()) +
                     " samples is shorter than one analysis window");
  }
  TensorF out({frames, cfg_.num_mels});
  for (int t = 0; t < frames; ++t) {
    ComputeFrame(wave.samples.data() + static_cast<size_t>(t) * cfg_.hop,
                 out.row(t));
  }
  return out;
}

TensorF StackFrames(const TensorF& base) {
  const int frames = StackedFrameCount(base.rows());
  if (base.rank() != 2 || frames == 0) {
    throw ShapeError("stacking needs at least " +
                     std::to_string(kStackFrames) + " base frames, got " +
                     std::to_string(base.rows()));
  }
  const int dim = base.cols();
  TensorF out({frames, kStackFrames * dim});
  for (int t = 0; t < frames; ++t) {
    const float* src = base.row(kStackStride * t);
    std::copy(src, src + kStackFrames * dim, out.row(t));
  }
  return out;
}

TensorF SpecAugment(const TensorF& base, const SpecAugmentConfig& cfg,
                    uint64_t seed) {
  TensorF out = base;
  if (cfg.time_masks <= 0 && cfg.freq_masks <= 0) return out;
  double sum = 0;
  for (float v : base.values()) sum += v;
  const float mean = static_cast<float>(sum / static_cast<double>(base.size()));
  std::mt19937_64 rng(seed);
  const int frames = base.rows();
  const int bins = base.cols();
  auto draw = [&](int max_width, int axis) {
    int w = std::min(max_width, axis);
    if (cfg.random_width && w > 0) {
      w = std::uniform_int_distribution<int>(0, w)(rng);
    }
    const int start = std::uniform_int_distribution<int>(0, axis - w)(rng);
    return std::pair<int, int>(start, w);
  };
  for (int i = 0; i < cfg.freq_masks; ++i) {
    auto [start, w] = draw(cfg.max_freq_width, bins);
    for (int t = 0; t < frames; ++t) {
      std::fill(out.row(t) + start, out.row(t) + start + w, mean);
    }
  }
  for (int i = 0; i < cfg.time_masks; ++i) {
    auto [start, w] = draw(cfg.max_time_width, frames);
    for (int t = start; t < start + w; ++t) {
      std::fill(out.row(t), out.row(t) + bins, mean);
    }
  }
  return out;
}

StreamingFeaturizer::StreamingFeaturizer(const LogMelExtractor& mel)
    : mel_(mel), base_(mel.config().num_mels) {}

FrameRows StreamingFeaturizer::Push(std::span<const float> samples) {
  const MelConfig& cfg = mel_.config();
  pending_.insert(pending_.end(), samples.begin(), samples.end());
  samples_seen_ += static_cast<int64_t>(samples.size());
  // pending_[0] is always the first sample of the next base window.
  size_t offset = 0;
  while (pending_.size() - offset >= static_cast<size_t>(cfg.window)) {
    float* dst = base_.AddRows(1);
    mel_.ComputeFrame(pending_.data() + offset, dst);
    ++base_total_;
    offset += cfg.hop;
  }
  pending_.erase(pending_.begin(), pending_.begin() + offset);
  pending_start_ += static_cast<int64_t>(offset);

  const int dim = cfg.num_mels;
  FrameRows out(kStackFrames * dim);
  while (base_total_ >= kStackStride * stacked_emitted_ + kStackFrames) {
    const int first = kStackStride * stacked_emitted_ - base_start_;
    out.AppendRow(base_.row(first));
    ++stacked_emitted_;
  }
  const int keep_from = kStackStride * stacked_emitted_;
  if (keep_from > base_start_) {
    const int drop = std::min(keep_from - base_start_, base_.rows());
    base_.DropFront(drop);
    base_start_ += drop;
  }
  return out;
}

}  // namespace sasr

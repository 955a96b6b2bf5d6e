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

#include "sasr/endpoint/session.h"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "sasr/frontend/features.h"

namespace sasr {

namespace {

using Clock = std::chrono::steady_clock;

double Since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

int SamplesToMs(size_t n) { return static_cast<int>(n * 1000 / kSampleRate); }

// Shared incremental pipeline: one 30 ms step of audio at a time.
class Pipeline {
 public:
  explicit Pipeline(const Recognizer& rec)
      : rec_(rec),
        featurizer_(mel_),
        stream_(*rec.model),
        beam_(rec.tokenizers->at(Level::kSubLarge).blank_id(),
              rec.tokenizers->at(Level::kSubLarge).eos_id(), rec.decode),
        char_rows_(rec.model->config().vocab[0]),
        small_rows_(rec.model->config().vocab[1]) {}

  // on_row(u, row) is called after the beam consumed top-level row u;
  // returning true stops the pipeline before any later row.
  template <typename OnRow>
  bool Advance(std::span<const float> samples, OnRow&& on_row) {
    auto t0 = Clock::now();
    FrameRows feats = featurizer_.Push(samples);
    times_.featurize_ms += Since(t0);
    if (feats.rows() == 0) return false;
    t0 = Clock::now();
    ModelStream::Emission em = stream_.Push(feats);
    times_.model_ms += Since(t0);
    return Consume(em, on_row);
  }

  void Finish() {
    auto t0 = Clock::now();
    ModelStream::Emission em = stream_.Flush();
    times_.model_ms += Since(t0);
    Consume(em, [](int, std::span<const float>) { return false; });
  }

  std::string BestText() const {
    return NormalizeText(
        rec_.tokenizers->at(Level::kSubLarge).Decode(beam_.best().prefix));
  }

  std::vector<ScoredHypothesis> Pool() {
    auto t0 = Clock::now();
    auto pool = ScorePool(beam_.beam(), rec_.decode.pool, char_rows_,
                          small_rows_, *rec_.tokenizers, rec_.lm);
    times_.rescore_ms += Since(t0);
    return pool;
  }

  int frames_consumed() const { return stream_.frames_consumed(); }
  StageTimes& times() { return times_; }

 private:
  template <typename OnRow>
  bool Consume(const ModelStream::Emission& em, OnRow&& on_row) {
    char_rows_.Append(em[0]);
    small_rows_.Append(em[1]);
    const FrameRows& top = em[2];
    for (int r = 0; r < top.rows(); ++r) {
      auto t0 = Clock::now();
      beam_.Step(top.row(r), top.dim());
      times_.decode_ms += Since(t0);
      if (on_row(top_rows_++, top.row_span(r))) return true;
    }
    return false;
  }

  const Recognizer& rec_;
  LogMelExtractor mel_;
  StreamingFeaturizer featurizer_;
  ModelStream stream_;
  PrefixBeamSearch beam_;
  FrameRows char_rows_;
  FrameRows small_rows_;
  int top_rows_ = 0;
  StageTimes times_;
};

std::span<const float> StepSamples(const Waveform& wave, size_t step) {
  const size_t begin = step * VadBackup::kFrameSamples;
  const size_t end = std::min(wave.samples.size(), begin + VadBackup::kFrameSamples);
  return {wave.samples.data() + begin, end - begin};
}

size_t StepCount(const Waveform& wave) {
  return (wave.samples.size() + VadBackup::kFrameSamples - 1) /
         VadBackup::kFrameSamples;
}

}  // namespace

void Recognizer::Validate() const {
  if (model == nullptr || tokenizers == nullptr) {
    throw std::invalid_argument("recognizer needs a model and tokenizers");
  }
  const ModelConfig& c = model->config();
  if (c.num_levels != kNumLevels) {
    throw std::invalid_argument("recognizer needs a three-level model");
  }
  for (int k = 0; k < kNumLevels; ++k) {
    if (c.vocab[k] != tokenizers->levels[k].size()) {
      throw std::invalid_argument("model output size " + std::to_string(c.vocab[k]) +
                                  " does not match " + LevelName(static_cast<Level>(k)) +
                                  " vocabulary size " +
                                  std::to_string(tokenizers->levels[k].size()));
    }
  }
}

SessionResult RunSession(const Waveform& wave, const Recognizer& rec,
                         const SessionOptions& opts) {
  rec.Validate();
  if (wave.sample_rate != kSampleRate) throw AudioError("expected 16 kHz audio");
  if (opts.mode == EosMode::kOn) opts.eos.Validate();
  const int eos_id = rec.tokenizers->at(Level::kSubLarge).eos_id();
  const size_t chunk_samples =
      std::max<size_t>(1, static_cast<size_t>(opts.chunk_ms) * kSampleRate / 1000);

  Pipeline pipe(rec);
  EosState eos;
  VadBackup vad(opts.eos);
  SessionResult result;
  result.stream_ms = SamplesToMs(wave.samples.size());
  bool fired = false;
  size_t next_interim = chunk_samples;

  const size_t steps = StepCount(wave);
  for (size_t k = 0; k < steps && !fired; ++k) {
    const auto samples = StepSamples(wave, k);
    const bool model_fired = pipe.Advance(samples, [&](int, std::span<const float> row) {
      if (opts.mode != EosMode::kOn) return false;
      return EosStep(&eos, row, eos_id, pipe.BestText(), opts.eos);
    });
    if (model_fired) {
      fired = true;
      result.source = DecisionSource::kModel;
      result.decision_row = eos.decision_frame;
      result.decision_ms = pipe.frames_consumed() * kFrameStrideMs;
    } else if (opts.mode == EosMode::kOn && vad.Step(FrameEnergy(samples))) {
      fired = true;
      result.source = vad.source();
      result.decision_ms = vad.position_ms();
    }
    const size_t consumed = k * VadBackup::kFrameSamples + samples.size();
    if (opts.on_interim && (consumed >= next_interim || consumed == wave.samples.size())) {
      opts.on_interim(SamplesToMs(consumed), pipe.BestText());
      while (next_interim <= consumed) next_interim += chunk_samples;
    }
  }
  if (!fired) {
    pipe.Finish();
    result.source = DecisionSource::kStreamEnd;
    result.decision_ms = result.stream_ms;
  }
  const auto pool = pipe.Pool();
  result.text = pool.empty() ? std::string() : PickBest(pool, rec.weights).text;
  result.times = pipe.times();
  return result;
}

std::string BatchTranscribe(const Waveform& wave, const Recognizer& rec) {
  rec.Validate();
  LogMelExtractor mel;
  const std::vector<PosteriorGrid> grids =
      rec.model->ForwardFull(StackFrames(mel.Compute(wave)));
  const Vocabulary& top = rec.tokenizers->at(Level::kSubLarge);
  const auto beam =
      PrefixBeamDecode(grids[2].log_probs, top.blank_id(), top.eos_id(), rec.decode);
  const auto pool = ScorePool(beam, rec.decode.pool, grids[0].log_probs,
                              grids[1].log_probs, *rec.tokenizers, rec.lm);
  return pool.empty() ? std::string() : PickBest(pool, rec.weights).text;
}

SessionTrace TraceSession(const Waveform& wave, const Recognizer& rec,
                          const EosConfig& eos_cfg) {
  rec.Validate();
  if (wave.sample_rate != kSampleRate) throw AudioError("expected 16 kHz audio");
  const int eos_id = rec.tokenizers->at(Level::kSubLarge).eos_id();
  SessionTrace trace;
  trace.top_rows = FrameRows(rec.model->config().vocab[2]);
  trace.stream_ms = SamplesToMs(wave.samples.size());
  Pipeline pipe(rec);
  VadBackup vad(eos_cfg);
  int step = -1;
  auto record = [&](int u, std::span<const float> row) {
    trace.top_rows.AppendRow(row.data());
    trace.best_text.push_back(pipe.BestText());
    trace.emit_step.push_back(step);
    trace.frames_consumed.push_back(pipe.frames_consumed());
    if (step >= 0 && IsEosPeak(row, eos_id) &&
        WordCount(trace.best_text.back()) > 0) {
      trace.pools[u] = pipe.Pool();
    }
    return false;
  };
  const size_t steps = StepCount(wave);
  for (size_t k = 0; k < steps; ++k) {
    step = static_cast<int>(k);
    const auto samples = StepSamples(wave, k);
    pipe.Advance(samples, record);
    if (trace.vad_step < 0 && vad.Step(FrameEnergy(samples))) {
      trace.vad_step = step;
      trace.vad_source = vad.source();
      trace.vad_ms = vad.position_ms();
      trace.vad_pool = pipe.Pool();
    }
  }
  step = -1;
  pipe.Finish();
  // Flushed rows still shape the final beam.
  trace.final_pool = pipe.Pool();
  return trace;
}

SessionResult ResolveSession(const SessionTrace& trace,
                             const RescoreWeights& weights, EosMode mode,
                             const EosConfig& eos_cfg, int eos_id) {
  SessionResult result;
  result.stream_ms = trace.stream_ms;
  const std::vector<ScoredHypothesis>* pool = &trace.final_pool;
  result.source = DecisionSource::kStreamEnd;
  result.decision_ms = trace.stream_ms;
  if (mode == EosMode::kOn) {
    eos_cfg.Validate();
    EosState eos;
    int fire_row = -1;
    for (int u = 0; u < trace.top_rows.rows() && trace.emit_step[u] >= 0; ++u) {
      if (trace.vad_step >= 0 && trace.emit_step[u] > trace.vad_step) break;
      if (EosStep(&eos, trace.top_rows.row_span(u), eos_id, trace.best_text[u], eos_cfg)) {
        fire_row = u;
        break;
      }
    }
    if (fire_row >= 0) {
      result.source = DecisionSource::kModel;
      result.decision_row = fire_row;
      result.decision_ms = trace.frames_consumed[fire_row] * kFrameStrideMs;
      pool = &trace.pools.at(fire_row);
    } else if (trace.vad_step >= 0) {
      result.source = trace.vad_source;
      result.decision_ms = trace.vad_ms;
      pool = &trace.vad_pool;
    }
  }
  result.text = pool->empty() ? std::string() : PickBest(*pool, weights).text;
  return result;
}

}  // namespace sasr

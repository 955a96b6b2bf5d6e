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

#ifndef SASR_ENDPOINT_SESSION_H_
#define SASR_ENDPOINT_SESSION_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sasr/decode/beam_search.h"
#include "sasr/decode/ngram.h"
#include "sasr/decode/rescore.h"
#include "sasr/endpoint/eos.h"
#include "sasr/frontend/wav.h"
#include "sasr/model/model.h"
#include "sasr/tokenizer/vocabulary.h"

namespace sasr {

// Immutable pieces shared by concurrent sessions.
struct Recognizer {
  const Model* model = nullptr;
  const TokenizerSet* tokenizers = nullptr;
  const NgramModel* lm = nullptr;  // optional
  DecodeConfig decode;
  RescoreWeights weights;

  // Throws std::invalid_argument on a missing piece or when the model's
  // output sizes differ from the vocabularies.
  void Validate() const;
};

enum class EosMode { kOn, kOff };

struct SessionOptions {
  EosMode mode = EosMode::kOn;
  EosConfig eos;
  int chunk_ms = 300;
  // Called after every chunk with the audio position and current best text.
  std::function<void(int, const std::string&)> on_interim;
};

struct StageTimes {
  double featurize_ms = 0;
  double model_ms = 0;
  double decode_ms = 0;
  double rescore_ms = 0;
};

struct SessionResult {
  std::string text;
  DecisionSource source = DecisionSource::kStreamEnd;
  int decision_ms = 0;
  int stream_ms = 0;
  int decision_row = -1;  // top-level row that fired the detector
  StageTimes times;
};

// Streams the waveform in 30 ms steps through features, model, beam search
// and the detectors, then rescores the pool.
SessionResult RunSession(const Waveform& wave, const Recognizer& rec,
                         const SessionOptions& opts);

// Whole-utterance reference path: forward_full, beam search, rescoring.
std::string BatchTranscribe(const Waveform& wave, const Recognizer& rec);

// Everything an EOS_ON session depends on that does not involve alpha and
// beta, recorded from one pass over the full stream.
struct SessionTrace {
  FrameRows top_rows;
  std::vector<std::string> best_text;  // after each top-level row
  std::vector<int> emit_step;          // 30 ms step index; -1 when flushed
  std::vector<int> frames_consumed;
  // Rescoring pools for rows where the detector could fire.
  std::map<int, std::vector<ScoredHypothesis>> pools;
  std::vector<ScoredHypothesis> final_pool;
  std::vector<ScoredHypothesis> vad_pool;
  int vad_step = -1;
  DecisionSource vad_source = DecisionSource::kVad;
  int vad_ms = 0;
  int stream_ms = 0;
};

// The VAD settings of eos are fixed into the trace.
SessionTrace TraceSession(const Waveform& wave, const Recognizer& rec,
                          const EosConfig& eos);

// Replays the detector over a trace; matches RunSession for any alpha, beta.
SessionResult ResolveSession(const SessionTrace& trace,
                             const RescoreWeights& weights, EosMode mode,
                             const EosConfig& eos, int eos_id);

}  // namespace sasr

#endif  // SASR_ENDPOINT_SESSION_H_

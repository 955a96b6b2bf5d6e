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

#ifndef SASR_HARNESS_SYNTH_H_
#define SASR_HARNESS_SYNTH_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sasr/frontend/wav.h"

namespace sasr {

// A toy language: every word is a fixed sequence of pure tones.
struct ToyLangSpec {
  int word_types = 20;
  int min_tones = 2;
  int max_tones = 4;
  int segment_ms = 80;
  int min_gap_ms = 40;
  int max_gap_ms = 200;
  int min_lead_ms = 200;
  int max_lead_ms = 1000;
  int min_trail_ms = 500;
  int max_trail_ms = 1500;
  double snr_db = 30;
  double amplitude = 0.3;
  int min_words = 1;
  int max_words = 6;
  uint64_t seed = 1;

  void Validate() const;
};

void to_json(nlohmann::json& j, const ToyLangSpec& s);
void from_json(const nlohmann::json& j, ToyLangSpec& s);

inline constexpr std::array<double, 8> kToneHz = {300,  500,  750,  1000,
                                                  1400, 1900, 2500, 3200};

struct ToyWord {
  std::string text;
  std::vector<int> tones;  // indices into kToneHz
};

// Distinct spellings with distinct tone sequences, fixed by spec.seed.
std::vector<ToyWord> ToyLexicon(const ToyLangSpec& spec);

struct ManifestRecord {
  std::string id;
  std::string audio;  // path
  std::string text;
  std::optional<int> endpoint_ms;
};

void to_json(nlohmann::json& j, const ManifestRecord& r);
void from_json(const nlohmann::json& j, ManifestRecord& r);

// One JSON object per line. Reading checks that text is non-empty and,
// when check_audio is set, that the audio file exists; relative audio
// paths are resolved against the manifest's directory.
std::vector<ManifestRecord> ReadManifest(const std::string& path,
                                         bool check_audio = true);
void WriteManifest(const std::string& path,
                   const std::vector<ManifestRecord>& records);

struct SynthUtterance {
  Waveform wave;
  std::string text;
  int endpoint_ms = 0;
};

// Deterministic in (spec, stream, index).
SynthUtterance SynthesizeUtterance(const ToyLangSpec& spec,
                                   const std::vector<ToyWord>& lexicon,
                                   uint64_t stream, int index,
                                   std::optional<int> num_words = std::nullopt);

// Expected utterance duration in ms under the spec's uniform draws.
double ExpectedDurationMs(const ToyLangSpec& spec,
                          const std::vector<ToyWord>& lexicon);

struct SplitCounts {
  int train = 500;
  int dev = 100;
  int test = 100;
};

struct DatasetPaths {
  std::string train;
  std::string dev;
  std::string test;
  double train_minutes = 0;
};

// Writes out_dir/{train,dev,test}.jsonl and WAVs under out_dir/wav.
DatasetPaths SynthDataset(const ToyLangSpec& spec, const SplitCounts& counts,
                          const std::string& out_dir);

}  // namespace sasr

#endif  // SASR_HARNESS_SYNTH_H_

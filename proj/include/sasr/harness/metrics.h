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

#ifndef SASR_HARNESS_METRICS_H_
#define SASR_HARNESS_METRICS_H_

#include <string>
#include <vector>

#include "json.hpp"

namespace sasr {

struct WerCounts {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int reference_words = 0;

  int errors() const { return substitutions + insertions + deletions; }
  // Percent; 0 for an empty reference with no insertions.
  double wer() const;
  WerCounts& operator+=(const WerCounts& o);
};

// Minimum edit alignment of whitespace-separated words. Among alignments
// with the fewest errors, substitutions are preferred over an
// insertion/deletion pair.
WerCounts AlignWords(const std::string& reference, const std::string& hypothesis);

struct UtteranceRow {
  std::string id;
  std::string reference;
  std::string hypothesis;
  std::string source;
  int decision_ms = 0;
  int stream_ms = 0;
  int endpoint_ms = -1;  // -1 when unknown
  WerCounts counts;

  bool model_fired() const { return source == "model"; }
};

struct EvalReport {
  WerCounts totals;
  double wer = 0;
  // Mean of decision - endpoint over utterances the model endpointed.
  double mean_latency_fired_ms = 0;
  // Same over all utterances, using the actual decision point (stream end
  // or backup) for the rest.
  double mean_latency_all_ms = 0;
  double coverage = 0;
  int utterances = 0;
  std::vector<UtteranceRow> rows;
};

// Aggregates rows; ids must be unique.
EvalReport Summarize(std::vector<UtteranceRow> rows);

nlohmann::json ReportJson(const EvalReport& r, bool with_rows);

// WER over id-matched pairs; throws std::invalid_argument when the id sets
// differ.
WerCounts CorpusWerById(const std::vector<std::pair<std::string, std::string>>& refs,
                        const std::vector<std::pair<std::string, std::string>>& hyps);

}  // namespace sasr

#endif  // SASR_HARNESS_METRICS_H_

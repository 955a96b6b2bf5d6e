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

#ifndef SASR_HARNESS_EVALUATE_H_
#define SASR_HARNESS_EVALUATE_H_

#include <functional>
#include <string>
#include <vector>

#include "sasr/decode/rescore.h"
#include "sasr/endpoint/session.h"
#include "sasr/harness/metrics.h"
#include "sasr/harness/synth.h"
#include "sasr/harness/trainer.h"

namespace sasr {

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void ParallelFor(int n, int threads, const std::function<void(int)>& fn);

// One streaming session per utterance.
EvalReport EvalRun(const Recognizer& rec, const std::vector<ManifestRecord>& records,
                   EosMode mode, const EosConfig& eos, int threads = 0);

std::vector<SessionTrace> TraceCorpus(const Recognizer& rec,
                                      const std::vector<ManifestRecord>& records,
                                      const EosConfig& eos, int threads = 0);

// Same aggregation as EvalRun, replayed from traces.
EvalReport EvalTraces(const std::vector<SessionTrace>& traces,
                      const std::vector<ManifestRecord>& records,
                      const RescoreWeights& weights, EosMode mode,
                      const EosConfig& eos, int eos_id);

struct SweepRow {
  double alpha = 0;
  double beta = 0;
  double wer = 0;
  double mean_latency_fired_ms = 0;
  double mean_latency_all_ms = 0;
  double coverage = 0;
};

// Row order: beta outer, alpha inner, both as given.
std::vector<SweepRow> Sweep(const std::vector<SessionTrace>& traces,
                            const std::vector<ManifestRecord>& records,
                            const RescoreWeights& weights,
                            const std::vector<double>& alphas,
                            const std::vector<double>& betas,
                            const EosConfig& base, int eos_id);

std::string SweepCsv(const std::vector<SweepRow>& rows);

// End-of-stream rescoring pools, for weight search.
std::vector<DevUtterance> DevPools(const std::vector<SessionTrace>& traces,
                                   const std::vector<ManifestRecord>& records);

// Fraction of examples whose top-level grid has a </s> peak within
// `tolerance` rows of the endpoint row.
double EosPeakHitRate(const Model& model, const TokenizerSet& tokenizers,
                      const std::vector<Example>& examples, int tolerance);

}  // namespace sasr

#endif  // SASR_HARNESS_EVALUATE_H_

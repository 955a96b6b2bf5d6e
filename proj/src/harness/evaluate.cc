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

#include "sasr/harness/evaluate.h"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sasr {

namespace {

UtteranceRow MakeRow(const ManifestRecord& r, const SessionResult& s) {
  UtteranceRow row;
  row.id = r.id;
  row.reference = NormalizeText(r.text);
  row.hypothesis = s.text;
  row.source = DecisionSourceName(s.source);
  row.decision_ms = s.decision_ms;
  row.stream_ms = s.stream_ms;
  row.endpoint_ms = r.endpoint_ms.value_or(-1);
  row.counts = AlignWords(row.reference, row.hypothesis);
  return row;
}

void CheckSizes(const std::vector<SessionTrace>& traces,
                const std::vector<ManifestRecord>& records) {
  if (traces.size() != records.size()) {
    throw std::invalid_argument("trace and manifest sizes differ");
  }
}

}  // namespace

void ParallelFor(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

EvalReport EvalRun(const Recognizer& rec, const std::vector<ManifestRecord>& records,
                   EosMode mode, const EosConfig& eos, int threads) {
  std::vector<UtteranceRow> rows(records.size());
  ParallelFor(static_cast<int>(records.size()), threads, [&](int i) {
    SessionOptions o;
    o.mode = mode;
    o.eos = eos;
    rows[i] = MakeRow(records[i], RunSession(ReadWav(records[i].audio), rec, o));
  });
  return Summarize(std::move(rows));
}

std::vector<SessionTrace> TraceCorpus(const Recognizer& rec,
                                      const std::vector<ManifestRecord>& records,
                                      const EosConfig& eos, int threads) {
  std::vector<SessionTrace> traces(records.size());
  ParallelFor(static_cast<int>(records.size()), threads, [&](int i) {
    traces[i] = TraceSession(ReadWav(records[i].audio), rec, eos);
  });
  return traces;
}

EvalReport EvalTraces(const std::vector<SessionTrace>& traces,
                      const std::vector<ManifestRecord>& records,
                      const RescoreWeights& weights, EosMode mode,
                      const EosConfig& eos, int eos_id) {
  CheckSizes(traces, records);
  std::vector<UtteranceRow> rows;
  rows.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    rows.push_back(MakeRow(records[i],
                           ResolveSession(traces[i], weights, mode, eos, eos_id)));
  }
  return Summarize(std::move(rows));
}

std::vector<SweepRow> Sweep(const std::vector<SessionTrace>& traces,
                            const std::vector<ManifestRecord>& records,
                            const RescoreWeights& weights,
                            const std::vector<double>& alphas,
                            const std::vector<double>& betas,
                            const EosConfig& base, int eos_id) {
  if (alphas.empty() || betas.empty()) {
    throw std::invalid_argument("sweep needs at least one alpha and one beta");
  }
  std::vector<SweepRow> out;
  for (double b : betas) {
    for (double a : alphas) {
      EosConfig c = base;
      c.alpha = a;
      c.beta = b;
      const EvalReport r = EvalTraces(traces, records, weights, EosMode::kOn, c, eos_id);
      out.push_back({a, b, r.wer, r.mean_latency_fired_ms, r.mean_latency_all_ms,
                     r.coverage});
    }
  }
  return out;
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "alpha,beta,wer,mean_latency_fired_ms,mean_latency_all_ms,coverage\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.4g,%.4g,%.4f,%.2f,%.2f,%.4f\n", r.alpha,
                  r.beta, r.wer, r.mean_latency_fired_ms, r.mean_latency_all_ms,
                  r.coverage);
    out << buf;
  }
  return out.str();
}

std::vector<DevUtterance> DevPools(const std::vector<SessionTrace>& traces,
                                   const std::vector<ManifestRecord>& records) {
  CheckSizes(traces, records);
  std::vector<DevUtterance> dev;
  for (size_t i = 0; i < records.size(); ++i) {
    if (traces[i].final_pool.empty()) continue;
    dev.push_back({NormalizeText(records[i].text), traces[i].final_pool});
  }
  return dev;
}

double EosPeakHitRate(const Model& model, const TokenizerSet& tokenizers,
                      const std::vector<Example>& examples, int tolerance) {
  const int eos = tokenizers.at(Level::kSubLarge).eos_id();
  int hits = 0;
  int counted = 0;
  for (const auto& ex : examples) {
    if (ex.endpoint_ms < 0) continue;
    ++counted;
    const FrameRows& g = model.ForwardFull(ex.features)[2].log_probs;
    const int ref = EosRefFrame(ex.endpoint_ms, 2, g.rows());
    for (int u = std::max(0, ref - tolerance);
         u <= std::min(g.rows() - 1, ref + tolerance); ++u) {
      if (IsEosPeak(g.row_span(u), eos)) {
        ++hits;
        break;
      }
    }
  }
  return counted == 0 ? 0.0 : static_cast<double>(hits) / counted;
}

}  // namespace sasr

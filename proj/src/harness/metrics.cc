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

#include "sasr/harness/metrics.h"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sasr {

namespace {

std::vector<std::string> Words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> w;
  std::string x;
  while (in >> x) w.push_back(x);
  return w;
}

struct Cell {
  int cost = 0;
  int subs = 0;
  int ins = 0;
  int del = 0;
};

bool Better(const Cell& a, const Cell& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.subs > b.subs;
}

}  // namespace

double WerCounts::wer() const {
  if (reference_words == 0) return errors() == 0 ? 0.0 : 100.0;
  return 100.0 * errors() / reference_words;
}

WerCounts& WerCounts::operator+=(const WerCounts& o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  reference_words += o.reference_words;
  return *this;
}

WerCounts AlignWords(const std::string& reference, const std::string& hypothesis) {
  const auto r = Words(reference);
  const auto h = Words(hypothesis);
  std::vector<std::vector<Cell>> d(r.size() + 1, std::vector<Cell>(h.size() + 1));
  for (size_t i = 1; i <= r.size(); ++i) d[i][0] = {static_cast<int>(i), 0, 0, static_cast<int>(i)};
  for (size_t j = 1; j <= h.size(); ++j) d[0][j] = {static_cast<int>(j), 0, static_cast<int>(j), 0};
  for (size_t i = 1; i <= r.size(); ++i) {
    for (size_t j = 1; j <= h.size(); ++j) {
      Cell diag = d[i - 1][j - 1];
      if (r[i - 1] != h[j - 1]) {
        ++diag.cost;
        ++diag.subs;
      }
      Cell del = d[i - 1][j];
      ++del.cost;
      ++del.del;
      Cell ins = d[i][j - 1];
      ++ins.cost;
      ++ins.ins;
      Cell best = diag;
      if (Better(del, best)) best = del;
      if (Better(ins, best)) best = ins;
      d[i][j] = best;
    }
  }
  const Cell& c = d[r.size()][h.size()];
  WerCounts w;
  w.substitutions = c.subs;
  w.insertions = c.ins;
  w.deletions = c.del;
  w.reference_words = static_cast<int>(r.size());
  return w;
}

EvalReport Summarize(std::vector<UtteranceRow> rows) {
  EvalReport rep;
  std::set<std::string> ids;
  double fired_sum = 0;
  double all_sum = 0;
  int fired = 0;
  int with_endpoint = 0;
  for (const auto& row : rows) {
    if (!ids.insert(row.id).second) {
      throw std::invalid_argument("duplicate utterance id " + row.id);
    }
    rep.totals += row.counts;
    if (row.model_fired()) ++fired;
    if (row.endpoint_ms >= 0) {
      const double lat = row.decision_ms - row.endpoint_ms;
      all_sum += lat;
      ++with_endpoint;
      if (row.model_fired()) fired_sum += lat;
    }
  }
  rep.utterances = static_cast<int>(rows.size());
  rep.wer = rep.totals.wer();
  rep.coverage = rows.empty() ? 0.0 : static_cast<double>(fired) / rows.size();
  rep.mean_latency_fired_ms = fired > 0 ? fired_sum / fired : 0.0;
  rep.mean_latency_all_ms = with_endpoint > 0 ? all_sum / with_endpoint : 0.0;
  rep.rows = std::move(rows);
  return rep;
}

nlohmann::json ReportJson(const EvalReport& r, bool with_rows) {
  nlohmann::json j = {{"wer", r.wer},
                      {"substitutions", r.totals.substitutions},
                      {"insertions", r.totals.insertions},
                      {"deletions", r.totals.deletions},
                      {"reference_words", r.totals.reference_words},
                      {"mean_latency_fired_ms", r.mean_latency_fired_ms},
                      {"mean_latency_all_ms", r.mean_latency_all_ms},
                      {"coverage", r.coverage},
                      {"utterances", r.utterances}};
  if (with_rows) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& u : r.rows) {
      rows.push_back({{"id", u.id},
                      {"reference", u.reference},
                      {"hypothesis", u.hypothesis},
                      {"source", u.source},
                      {"decision_ms", u.decision_ms},
                      {"stream_ms", u.stream_ms},
                      {"endpoint_ms", u.endpoint_ms},
                      {"errors", u.counts.errors()}});
    }
    j["rows"] = rows;
  }
  return j;
}

WerCounts CorpusWerById(const std::vector<std::pair<std::string, std::string>>& refs,
                        const std::vector<std::pair<std::string, std::string>>& hyps) {
  std::map<std::string, std::string> h;
  for (const auto& [id, text] : hyps) {
    if (!h.emplace(id, text).second) throw std::invalid_argument("duplicate id " + id);
  }
  if (h.size() != refs.size()) throw std::invalid_argument("reference and hypothesis ids differ");
  WerCounts total;
  for (const auto& [id, text] : refs) {
    auto it = h.find(id);
    if (it == h.end()) throw std::invalid_argument("no hypothesis for id " + id);
    total += AlignWords(text, it->second);
  }
  return total;
}

}  // namespace sasr

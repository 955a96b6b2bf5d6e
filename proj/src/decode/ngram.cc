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

#include "sasr/decode/ngram.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sasr {

namespace {

std::vector<std::string> Words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

NgramModel NgramModel::Train(const std::vector<std::string>& corpus,
                             int order, double discount) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (!(discount > 0 && discount < 1)) {
    throw std::invalid_argument("discount must lie in (0, 1)");
  }
  std::vector<std::map<Key, int64_t>> counts(order);
  int64_t tokens = 0;
  for (const auto& line : corpus) {
    std::vector<std::string> s = Words(line);
    if (s.empty()) continue;
    s.insert(s.begin(), kSentenceBegin);
    s.push_back(kSentenceEnd);
    for (size_t i = 1; i < s.size(); ++i) {
      ++tokens;
      for (int n = 1; n <= order && static_cast<int>(i) + 1 >= n; ++n) {
        ++counts[n - 1][Key(s.begin() + (i + 1 - n), s.begin() + i + 1)];
      }
    }
  }
  if (tokens == 0) throw std::invalid_argument("cannot train an LM on an empty corpus");

  NgramModel m(order);
  for (const auto& [k, c] : counts[0]) {
    m.tables_[0][k].log10_prob =
        std::log10(static_cast<double>(c) / static_cast<double>(tokens));
  }
  m.tables_[0][{kSentenceBegin}].log10_prob = -99.0;
  m.tables_[0][{kUnknownWord}].log10_prob = kUnknownLog10;

  for (int n = 2; n <= order; ++n) {
    std::map<Key, int64_t> context_total;
    for (const auto& [k, c] : counts[n - 1]) {
      context_total[Key(k.begin(), k.end() - 1)] += c;
    }
    for (const auto& [k, c] : counts[n - 1]) {
      const double total =
          static_cast<double>(context_total[Key(k.begin(), k.end() - 1)]);
      m.tables_[n - 1][k].log10_prob =
          std::log10((static_cast<double>(c) - discount) / total);
    }
    // Back-off weights of the (n-1)-gram contexts so that each conditional
    // distribution sums to one.
    std::map<Key, std::pair<double, double>> mass;  // (seen, seen at lower)
    for (const auto& [k, e] : m.tables_[n - 1]) {
      const Key ctx(k.begin(), k.end() - 1);
      auto& [seen, lower] = mass[ctx];
      seen += std::pow(10.0, e.log10_prob);
      lower += std::pow(10.0, m.Conditional(Key(ctx.begin() + 1, ctx.end()),
                                            k.back()));
    }
    for (auto& [ctx, e] : m.tables_[n - 2]) {
      auto it = mass.find(ctx);
      if (it == mass.end()) continue;
      const double left = std::max(1.0 - it->second.first, 1e-12);
      const double right = 1.0 - it->second.second;
      e.log10_backoff = std::log10(right > 1e-12 ? left / right : left);
    }
  }
  return m;
}

double NgramModel::Conditional(const Key& context,
                               const std::string& word) const {
  const auto& unigrams = tables_.at(0);
  const std::string w = unigrams.count({word}) ? word : kUnknownWord;
  const int max_len =
      std::min(static_cast<int>(context.size()), order_ - 1);
  double backoff = 0;
  for (int len = max_len; len >= 0; --len) {
    Key key(context.end() - len, context.end());
    key.push_back(w);
    auto it = tables_[len].find(key);
    if (it != tables_[len].end()) return backoff + it->second.log10_prob;
    if (len > 0) {
      auto ctx = tables_[len - 1].find(Key(context.end() - len, context.end()));
      if (ctx != tables_[len - 1].end()) backoff += ctx->second.log10_backoff;
    }
  }
  return backoff + kUnknownLog10;
}

double NgramModel::Score(const std::vector<std::string>& words) const {
  Key history = {kSentenceBegin};
  double total = 0;
  for (const auto& w : words) {
    total += Conditional(history, w);
    history.push_back(w);
  }
  return total + Conditional(history, kSentenceEnd);
}

double NgramModel::ScoreText(const std::string& text) const {
  return Score(Words(text));
}

void NgramModel::WriteArpa(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "\n\\data\\\n";
  for (int n = 1; n <= order_; ++n) {
    f << "ngram " << n << "=" << tables_[n - 1].size() << "\n";
  }
  f << std::setprecision(10);
  for (int n = 1; n <= order_; ++n) {
    f << "\n\\" << n << "-grams:\n";
    for (const auto& [k, e] : tables_[n - 1]) {
      f << e.log10_prob << '\t';
      for (size_t i = 0; i < k.size(); ++i) f << (i ? " " : "") << k[i];
      if (n < order_) f << '\t' << e.log10_backoff;
      f << '\n';
    }
  }
  f << "\n\\end\\\n";
  if (!f) throw std::runtime_error("failed writing " + path);
}

NgramModel NgramModel::ReadArpa(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open LM " + path);
  std::string line;
  std::vector<int64_t> declared;
  NgramModel m;
  int section = 0;
  bool in_data = false;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "\\data\\") {
      in_data = true;
      continue;
    }
    if (line == "\\end\\") break;
    if (line.front() == '\\') {
      in_data = false;
      section = std::stoi(line.substr(1));
      if (section < 1 || section > static_cast<int>(declared.size())) {
        throw std::runtime_error(path + ": unexpected section " + line);
      }
      continue;
    }
    if (in_data) {
      if (line.rfind("ngram ", 0) != 0) continue;
      const auto eq = line.find('=');
      declared.push_back(std::stoll(line.substr(eq + 1)));
      m.order_ = static_cast<int>(declared.size());
      m.tables_.resize(m.order_);
      continue;
    }
    if (section == 0) throw std::runtime_error(path + ": entry outside a section");
    std::istringstream in(line);
    Entry e;
    Key k(section);
    if (!(in >> e.log10_prob)) throw std::runtime_error(path + ": bad line " + line);
    for (auto& w : k) {
      if (!(in >> w)) throw std::runtime_error(path + ": short n-gram " + line);
    }
    in >> e.log10_backoff;
    m.tables_[section - 1][k] = e;
  }
  for (int n = 0; n < m.order_; ++n) {
    if (static_cast<int64_t>(m.tables_[n].size()) != declared[n]) {
      throw std::runtime_error(path + ": " + std::to_string(n + 1) +
                               "-gram count does not match header");
    }
  }
  if (m.order_ == 0) throw std::runtime_error(path + ": no \\data\\ header");
  return m;
}

}  // namespace sasr

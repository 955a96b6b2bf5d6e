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

#ifndef SASR_DECODE_NGRAM_H_
#define SASR_DECODE_NGRAM_H_

#include <map>
#include <string>
#include <vector>

namespace sasr {

inline constexpr char kSentenceBegin[] = "<s>";
inline constexpr char kSentenceEnd[] = "</s>";
inline constexpr char kUnknownWord[] = "<unk>";
inline constexpr double kUnknownLog10 = -7.0;

// Back-off n-gram model over whitespace words, log10 throughout.
class NgramModel {
 public:
  struct Entry {
    double log10_prob = 0;
    double log10_backoff = 0;
  };
  using Key = std::vector<std::string>;

  NgramModel() = default;
  explicit NgramModel(int order) : order_(order), tables_(order) {}

  // Absolute discounting with back-off. Throws std::invalid_argument on an
  // empty corpus or bad order/discount.
  static NgramModel Train(const std::vector<std::string>& corpus, int order,
                          double discount = 0.5);

  int order() const { return order_; }
  // tables()[n-1] holds the n-grams.
  const std::vector<std::map<Key, Entry>>& tables() const { return tables_; }
  void Set(const Key& ngram, Entry e) { tables_.at(ngram.size() - 1)[ngram] = e; }

  // log10 P(word | context), context oldest first (only the last order-1
  // words matter).
  double Conditional(const Key& context, const std::string& word) const;
  // Sum of conditionals of every word and the end marker, starting from the
  // begin marker.
  double Score(const std::vector<std::string>& words) const;
  double ScoreText(const std::string& text) const;

  void WriteArpa(const std::string& path) const;
  static NgramModel ReadArpa(const std::string& path);

 private:
  int order_ = 0;
  std::vector<std::map<Key, Entry>> tables_;
};

}  // namespace sasr

#endif  // SASR_DECODE_NGRAM_H_

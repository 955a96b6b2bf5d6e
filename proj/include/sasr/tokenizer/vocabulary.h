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

#ifndef SASR_TOKENIZER_VOCABULARY_H_
#define SASR_TOKENIZER_VOCABULARY_H_

#include <array>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sasr {

enum class Level { kChar = 0, kSubSmall = 1, kSubLarge = 2 };
inline constexpr int kNumLevels = 3;

const char* LevelName(Level level);

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kBlankLiteral[] = "<blank>";
inline constexpr char kEosLiteral[] = "</s>";
// The word separator is stored as " " and written to files as this literal.
inline constexpr char kSpaceLiteral[] = "<space>";

// Lowercases, collapses runs of whitespace to one space and trims.
std::string NormalizeText(const std::string& text);

// Immutable token inventory. Ids are dense; blank is always id 0.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(Level level, std::vector<std::string> tokens);

  Level level() const { return level_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  int blank_id() const { return blank_id_; }
  int eos_id() const { return eos_id_; }
  int space_id() const { return space_id_; }
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // -1 when absent.
  int Find(const std::string& token) const;

  // Greedy longest match inside each word; words are joined by the
  // separator token. Throws VocabError naming an uncoverable character.
  std::vector<int> Encode(const std::string& text) const;
  // Blank and </s> are dropped.
  std::string Decode(const std::vector<int>& ids) const;

  void Save(const std::string& path) const;
  static Vocabulary Load(const std::string& path, Level level);

 private:
  Level level_ = Level::kChar;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int blank_id_ = -1;
  int eos_id_ = -1;
  int space_id_ = -1;
  size_t max_token_len_ = 1;
};

// One token per distinct character plus separator, blank and </s>.
Vocabulary BuildCharVocab(const std::vector<std::string>& corpus);

struct BpeResult {
  Vocabulary vocab;
  // Merges in the order applied.
  std::vector<std::pair<std::string, std::string>> merges;
  bool reached_target = false;
};

// Pair merging within words until the vocabulary has target_size tokens
// (specials included). Ties go to the lexicographically smallest pair.
BpeResult TrainBpe(const std::vector<std::string>& corpus, int target_size,
                   Level level);

// The three target sequences of one utterance.
struct LevelTargets {
  std::array<std::vector<int>, kNumLevels> y;
};

struct TokenizerSet {
  std::array<Vocabulary, kNumLevels> levels;

  const Vocabulary& at(Level level) const {
    return levels[static_cast<int>(level)];
  }
  LevelTargets Encode(const std::string& text) const;
};

}  // namespace sasr

#endif  // SASR_TOKENIZER_VOCABULARY_H_

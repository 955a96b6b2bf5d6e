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

#include "sasr/tokenizer/vocabulary.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sasr {

namespace {

std::vector<std::string> SplitWords(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::set<char> DistinctChars(const std::vector<std::string>& corpus) {
  std::set<char> chars;
  for (const auto& line : corpus) {
    for (char c : NormalizeText(line)) {
      if (c != ' ') chars.insert(c);
    }
  }
  return chars;
}

}  // namespace

const char* LevelName(Level level) {
  switch (level) {
    case Level::kChar:
      return "char";
    case Level::kSubSmall:
      return "sub_small";
    case Level::kSubLarge:
      return "sub_large";
  }
  return "?";
}

std::string NormalizeText(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

Vocabulary::Vocabulary(Level level, std::vector<std::string> tokens)
    : level_(level), tokens_(std::move(tokens)) {
  for (int i = 0; i < size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) throw VocabError("empty token at id " + std::to_string(i));
    if (!index_.emplace(t, i).second) {
      throw VocabError("duplicate token '" + t + "'");
    }
    if (t == kBlankLiteral) {
      blank_id_ = i;
    } else if (t == kEosLiteral) {
      eos_id_ = i;
    } else {
      if (t == " ") space_id_ = i;
      max_token_len_ = std::max(max_token_len_, t.size());
    }
  }
  if (blank_id_ < 0 || eos_id_ < 0) {
    throw VocabError("vocabulary needs both <blank> and </s>");
  }
  if (space_id_ < 0) throw VocabError("vocabulary has no word separator");
}

int Vocabulary::Find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::Encode(const std::string& text) const {
  std::vector<int> ids;
  const auto words = SplitWords(NormalizeText(text));
  for (size_t w = 0; w < words.size(); ++w) {
    if (w > 0) ids.push_back(space_id_);
    const std::string& word = words[w];
    size_t pos = 0;
    while (pos < word.size()) {
      int match = -1;
      size_t len = std::min(max_token_len_, word.size() - pos);
      for (; len > 0; --len) {
        match = Find(word.substr(pos, len));
        if (match >= 0 && match != blank_id_ && match != eos_id_) break;
        match = -1;
      }
      if (match < 0) {
        throw VocabError(std::string("character '") + word[pos] +
                         "' is not covered by the " + LevelName(level_) +
                         " vocabulary");
      }
      ids.push_back(match);
      pos += len;
    }
  }
  return ids;
}

std::string Vocabulary::Decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= size()) {
      throw VocabError("token id " + std::to_string(id) + " out of range");
    }
    if (id == blank_id_ || id == eos_id_) continue;
    out += tokens_[id];
  }
  return out;
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw VocabError("cannot write " + path);
  for (const auto& t : tokens_) f << (t == " " ? kSpaceLiteral : t) << '\n';
  if (!f) throw VocabError("failed writing " + path);
}

Vocabulary Vocabulary::Load(const std::string& path, Level level) {
  std::ifstream f(path);
  if (!f) throw VocabError("cannot open vocabulary " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line == kSpaceLiteral ? " " : line);
  }
  return Vocabulary(level, std::move(tokens));
}

Vocabulary BuildCharVocab(const std::vector<std::string>& corpus) {
  const std::set<char> chars = DistinctChars(corpus);
  if (chars.empty()) throw VocabError("cannot build a vocabulary from an empty corpus");
  std::vector<std::string> tokens = {kBlankLiteral};
  for (char c : chars) tokens.emplace_back(1, c);
  tokens.emplace_back(" ");
  tokens.emplace_back(kEosLiteral);
  return Vocabulary(Level::kChar, std::move(tokens));
}

BpeResult TrainBpe(const std::vector<std::string>& corpus, int target_size,
                   Level level) {
  const Vocabulary base = BuildCharVocab(corpus);
  if (target_size <= base.size()) {
    throw VocabError("subword target size " + std::to_string(target_size) +
                     " must exceed the character vocabulary size " +
                     std::to_string(base.size()));
  }
  // Word type -> (symbols, count).
  std::map<std::string, int> word_counts;
  for (const auto& line : corpus) {
    for (const auto& w : SplitWords(NormalizeText(line))) ++word_counts[w];
  }
  std::vector<std::vector<std::string>> words;
  std::vector<int> counts;
  for (const auto& [w, n] : word_counts) {
    std::vector<std::string> symbols;
    for (char c : w) symbols.emplace_back(1, c);
    words.push_back(std::move(symbols));
    counts.push_back(n);
  }

  std::vector<std::string> tokens(base.tokens().begin(),
                                  base.tokens().end() - 1);  // without </s>
  std::set<std::string> known(tokens.begin(), tokens.end());
  BpeResult result;
  // +1 accounts for </s>, appended at the end.
  while (static_cast<int>(tokens.size()) + 1 < target_size) {
    std::map<std::pair<std::string, std::string>, int64_t> pairs;
    for (size_t i = 0; i < words.size(); ++i) {
      for (size_t j = 0; j + 1 < words[i].size(); ++j) {
        pairs[{words[i][j], words[i][j + 1]}] += counts[i];
      }
    }
    if (pairs.empty()) break;
    // std::map iterates in lexicographic order, so the first maximum wins.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    for (auto& symbols : words) {
      std::vector<std::string> next;
      for (size_t j = 0; j < symbols.size(); ++j) {
        if (j + 1 < symbols.size() && symbols[j] == left &&
            symbols[j + 1] == right) {
          next.push_back(merged);
          ++j;
        } else {
          next.push_back(symbols[j]);
        }
      }
      symbols = std::move(next);
    }
    result.merges.emplace_back(left, right);
    if (known.insert(merged).second) tokens.push_back(merged);
  }
  result.reached_target = static_cast<int>(tokens.size()) + 1 == target_size;
  tokens.emplace_back(kEosLiteral);
  result.vocab = Vocabulary(level, std::move(tokens));
  return result;
}

LevelTargets TokenizerSet::Encode(const std::string& text) const {
  LevelTargets t;
  for (int l = 0; l < kNumLevels; ++l) t.y[l] = levels[l].Encode(text);
  return t;
}

}  // namespace sasr

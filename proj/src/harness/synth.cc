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

#include "sasr/harness/synth.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace sasr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSpellings[] = {
    "red", "blue", "cat", "dog", "sun", "map", "cup", "hat", "box", "pen",
    "key", "fox", "owl", "jam", "bus", "net", "lid", "toy", "fig", "web",
    "ant", "bed", "car", "den", "elf", "gum", "hen", "ink", "jar", "kit",
    "log", "mud", "nut", "oak", "pig", "rug", "sky", "tub", "van", "yak"};
constexpr int kMaxWordTypes = sizeof(kSpellings) / sizeof(kSpellings[0]);
constexpr int kRampMs = 5;

int Uniform(std::mt19937_64* rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(*rng);
}

void AddTone(std::vector<float>* out, size_t start, int ms, double hz,
             double amp) {
  const size_t n = static_cast<size_t>(ms) * kSampleRate / 1000;
  const size_t ramp = static_cast<size_t>(kRampMs) * kSampleRate / 1000;
  for (size_t i = 0; i < n; ++i) {
    double gain = 1.0;
    if (i < ramp) gain = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
    if (n - 1 - i < ramp) {
      gain = 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / ramp);
    }
    (*out)[start + i] += static_cast<float>(
        amp * gain * std::sin(2 * std::numbers::pi * hz * i / kSampleRate));
  }
}

size_t MsToSamples(int ms) {
  return static_cast<size_t>(ms) * kSampleRate / 1000;
}

}  // namespace

void ToyLangSpec::Validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (word_types < 1 || word_types > kMaxWordTypes) {
    fail("word_types must be in [1, " + std::to_string(kMaxWordTypes) + "]");
  }
  if (min_tones < 1 || max_tones < min_tones) fail("bad tone count range");
  if (segment_ms <= 2 * kRampMs) fail("segment_ms too short");
  if (min_gap_ms < 0 || max_gap_ms < min_gap_ms) fail("bad gap range");
  if (min_lead_ms < 0 || max_lead_ms < min_lead_ms) fail("bad leading silence range");
  if (min_trail_ms < 0 || max_trail_ms < min_trail_ms) fail("bad trailing silence range");
  if (min_words < 1 || max_words < min_words) fail("bad words per utterance range");
  if (!(amplitude > 0 && amplitude < 1)) fail("amplitude must be in (0, 1)");
}

void to_json(nlohmann::json& j, const ToyLangSpec& s) {
  j = {{"word_types", s.word_types}, {"min_tones", s.min_tones},
       {"max_tones", s.max_tones},   {"segment_ms", s.segment_ms},
       {"min_gap_ms", s.min_gap_ms}, {"max_gap_ms", s.max_gap_ms},
       {"min_lead_ms", s.min_lead_ms}, {"max_lead_ms", s.max_lead_ms},
       {"min_trail_ms", s.min_trail_ms}, {"max_trail_ms", s.max_trail_ms},
       {"snr_db", s.snr_db},         {"amplitude", s.amplitude},
       {"min_words", s.min_words},   {"max_words", s.max_words},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, ToyLangSpec& s) {
  const ToyLangSpec d;
  s.word_types = j.value("word_types", d.word_types);
  s.min_tones = j.value("min_tones", d.min_tones);
  s.max_tones = j.value("max_tones", d.max_tones);
  s.segment_ms = j.value("segment_ms", d.segment_ms);
  s.min_gap_ms = j.value("min_gap_ms", d.min_gap_ms);
  s.max_gap_ms = j.value("max_gap_ms", d.max_gap_ms);
  s.min_lead_ms = j.value("min_lead_ms", d.min_lead_ms);
  s.max_lead_ms = j.value("max_lead_ms", d.max_lead_ms);
  s.min_trail_ms = j.value("min_trail_ms", d.min_trail_ms);
  s.max_trail_ms = j.value("max_trail_ms", d.max_trail_ms);
  s.snr_db = j.value("snr_db", d.snr_db);
  s.amplitude = j.value("amplitude", d.amplitude);
  s.min_words = j.value("min_words", d.min_words);
  s.max_words = j.value("max_words", d.max_words);
  s.seed = j.value("seed", d.seed);
}

std::vector<ToyWord> ToyLexicon(const ToyLangSpec& spec) {
  spec.Validate();
  std::seed_seq seq{static_cast<uint32_t>(spec.seed),
                    static_cast<uint32_t>(spec.seed >> 32), 0u, 0u};
  std::mt19937_64 rng(seq);
  std::set<std::vector<int>> used;
  std::vector<ToyWord> words;
  for (int w = 0; w < spec.word_types; ++w) {
    ToyWord word;
    word.text = kSpellings[w];
    do {
      const int n = Uniform(&rng, spec.min_tones, spec.max_tones);
      word.tones.clear();
      while (static_cast<int>(word.tones.size()) < n) {
        const int t = Uniform(&rng, 0, kToneHz.size() - 1);
        // Adjacent segments always differ so every boundary is audible.
        if (!word.tones.empty() && word.tones.back() == t) continue;
        word.tones.push_back(t);
      }
    } while (!used.insert(word.tones).second);
    words.push_back(std::move(word));
  }
  return words;
}

void to_json(nlohmann::json& j, const ManifestRecord& r) {
  j = {{"id", r.id}, {"audio", r.audio}, {"text", r.text}};
  if (r.endpoint_ms) j["endpoint_ms"] = *r.endpoint_ms;
}

void from_json(const nlohmann::json& j, ManifestRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.audio = j.at("audio").get<std::string>();
  r.text = j.at("text").get<std::string>();
  if (j.contains("endpoint_ms") && !j["endpoint_ms"].is_null()) {
    r.endpoint_ms = j["endpoint_ms"].get<int>();
  } else {
    r.endpoint_ms.reset();
  }
}

std::vector<ManifestRecord> ReadManifest(const std::string& path,
                                         bool check_audio) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<ManifestRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord r;
    try {
      r = nlohmann::json::parse(line).get<ManifestRecord>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (r.text.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty text");
    }
    if (fs::path(r.audio).is_relative()) r.audio = (base / r.audio).string();
    if (check_audio && !fs::exists(r.audio)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": missing audio " + r.audio);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void WriteManifest(const std::string& path,
                   const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
  if (!out) throw std::runtime_error("error writing manifest " + path);
}

SynthUtterance SynthesizeUtterance(const ToyLangSpec& spec,
                                   const std::vector<ToyWord>& lexicon,
                                   uint64_t stream, int index,
                                   std::optional<int> num_words) {
  std::seed_seq seq{static_cast<uint32_t>(spec.seed),
                    static_cast<uint32_t>(spec.seed >> 32),
                    static_cast<uint32_t>(stream), static_cast<uint32_t>(index)};
  std::mt19937_64 rng(seq);
  const int n = num_words ? *num_words : Uniform(&rng, spec.min_words, spec.max_words);
  std::vector<int> picks(n);
  for (int& p : picks) p = Uniform(&rng, 0, static_cast<int>(lexicon.size()) - 1);
  std::vector<int> gaps(std::max(0, n - 1));
  for (int& g : gaps) g = Uniform(&rng, spec.min_gap_ms, spec.max_gap_ms);
  const int lead = Uniform(&rng, spec.min_lead_ms, spec.max_lead_ms);
  const int trail = Uniform(&rng, spec.min_trail_ms, spec.max_trail_ms);

  int total = lead + trail;
  for (int p : picks) total += spec.segment_ms * static_cast<int>(lexicon[p].tones.size());
  for (int g : gaps) total += g;

  SynthUtterance u;
  u.wave.samples.assign(MsToSamples(total), 0.f);
  int pos = lead;
  for (int i = 0; i < n; ++i) {
    const ToyWord& w = lexicon[picks[i]];
    for (int tone : w.tones) {
      AddTone(&u.wave.samples, MsToSamples(pos), spec.segment_ms, kToneHz[tone],
              spec.amplitude);
      pos += spec.segment_ms;
    }
    if (!u.text.empty()) u.text += ' ';
    u.text += w.text;
    if (i + 1 < n) pos += gaps[i];
  }
  u.endpoint_ms = pos;

  const double signal_power = spec.amplitude * spec.amplitude / 2;
  const double sigma = std::sqrt(signal_power / std::pow(10.0, spec.snr_db / 10));
  std::normal_distribution<double> noise(0, sigma);
  for (float& s : u.wave.samples) {
    s = QuantizePcm16(static_cast<float>(s + noise(rng)));
  }
  return u;
}

double ExpectedDurationMs(const ToyLangSpec& spec,
                          const std::vector<ToyWord>& lexicon) {
  double word_ms = 0;
  for (const auto& w : lexicon) word_ms += spec.segment_ms * w.tones.size();
  word_ms /= lexicon.size();
  const double words = (spec.min_words + spec.max_words) / 2.0;
  return (spec.min_lead_ms + spec.max_lead_ms) / 2.0 +
         (spec.min_trail_ms + spec.max_trail_ms) / 2.0 + words * word_ms +
         (words - 1) * (spec.min_gap_ms + spec.max_gap_ms) / 2.0;
}

DatasetPaths SynthDataset(const ToyLangSpec& spec, const SplitCounts& counts,
                          const std::string& out_dir) {
  const auto lexicon = ToyLexicon(spec);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());
  DatasetPaths paths;
  const std::array<std::pair<const char*, int>, 3> splits = {
      {{"train", counts.train}, {"dev", counts.dev}, {"test", counts.test}}};
  for (size_t s = 0; s < splits.size(); ++s) {
    const std::string name = splits[s].first;
    std::vector<ManifestRecord> records;
    double ms = 0;
    for (int i = 0; i < splits[s].second; ++i) {
      SynthUtterance u = SynthesizeUtterance(spec, lexicon, s + 1, i);
      ManifestRecord r;
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%05d", name.c_str(), i);
      r.id = id;
      r.audio = "wav/" + r.id + ".wav";
      r.text = u.text;
      r.endpoint_ms = u.endpoint_ms;
      WriteWav((fs::path(out_dir) / r.audio).string(), u.wave);
      ms += 1000.0 * u.wave.samples.size() / kSampleRate;
      records.push_back(std::move(r));
    }
    const std::string path = (fs::path(out_dir) / (name + ".jsonl")).string();
    WriteManifest(path, records);
    if (s == 0) {
      paths.train = path;
      paths.train_minutes = ms / 60000.0;
    } else if (s == 1) {
      paths.dev = path;
    } else {
      paths.test = path;
    }
  }
  return paths;
}

}  // namespace sasr

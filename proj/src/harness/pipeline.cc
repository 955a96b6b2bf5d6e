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

#include "sasr/harness/pipeline.h"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace sasr {

namespace fs = std::filesystem;

namespace {

nlohmann::json DecodeJson(const DecodeConfig& d) {
  return {{"beam", d.beam}, {"top_k", d.top_k}, {"prune_floor", d.prune_floor},
          {"pool", d.pool}};
}

DecodeConfig DecodeFromJson(const nlohmann::json& j, DecodeConfig d) {
  d.beam = j.value("beam", d.beam);
  d.top_k = j.value("top_k", d.top_k);
  d.prune_floor = j.value("prune_floor", d.prune_floor);
  d.pool = j.value("pool", d.pool);
  return d;
}

nlohmann::json EosJson(const EosConfig& e) {
  return {{"alpha", e.alpha},
          {"beta", e.beta},
          {"vad_energy_threshold", e.vad_energy_threshold},
          {"vad_min_silence_ms", e.vad_min_silence_ms},
          {"vad_no_speech_ms", e.vad_no_speech_ms},
          {"max_utterance_ms", e.max_utterance_ms}};
}

EosConfig EosFromJson(const nlohmann::json& j, EosConfig e) {
  e.alpha = j.value("alpha", e.alpha);
  e.beta = j.value("beta", e.beta);
  e.vad_energy_threshold = j.value("vad_energy_threshold", e.vad_energy_threshold);
  e.vad_min_silence_ms = j.value("vad_min_silence_ms", e.vad_min_silence_ms);
  e.vad_no_speech_ms = j.value("vad_no_speech_ms", e.vad_no_speech_ms);
  e.max_utterance_ms = j.value("max_utterance_ms", e.max_utterance_ms);
  return e;
}

}  // namespace

HarnessConfig::HarnessConfig() {
  decode.beam = 64;
  decode.pool = 32;
  finetune.iterations = 300;
  finetune.peak_lr = 5e-4;
  finetune.floor_lr = 5e-5;
  finetune.eos_targets = true;
  weight_grid.w_lm = {0, 0.25, 0.5, 1.0};
  weight_grid.w_char = {0, 0.1, 0.3};
  weight_grid.w_s300 = {0, 0.1, 0.3};
  weight_grid.w_len = {0, 0.5, 1.0, 2.0};
}

HarnessConfig HarnessConfig::FromJson(const nlohmann::json& j) {
  HarnessConfig c;
  c.workdir = j.value("workdir", c.workdir);
  if (j.contains("data")) c.data = j["data"].get<ToyLangSpec>();
  if (j.contains("counts")) {
    const auto& k = j["counts"];
    c.counts.train = k.value("train", c.counts.train);
    c.counts.dev = k.value("dev", c.counts.dev);
    c.counts.test = k.value("test", c.counts.test);
  }
  c.small_vocab = j.value("small_vocab", c.small_vocab);
  c.large_vocab = j.value("large_vocab", c.large_vocab);
  c.lm_order = j.value("lm_order", c.lm_order);
  if (j.contains("model")) c.model = j["model"].get<ModelConfig>();
  if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
  if (j.contains("finetune")) {
    nlohmann::json f = nlohmann::json(c.finetune);
    f.update(j["finetune"]);
    c.finetune = f.get<TrainConfig>();
  }
  if (j.contains("decode")) c.decode = DecodeFromJson(j["decode"], c.decode);
  if (j.contains("weight_grid")) {
    const auto& g = j["weight_grid"];
    c.weight_grid.w_lm = g.value("w_lm", c.weight_grid.w_lm);
    c.weight_grid.w_char = g.value("w_char", c.weight_grid.w_char);
    c.weight_grid.w_s300 = g.value("w_s300", c.weight_grid.w_s300);
    c.weight_grid.w_len = g.value("w_len", c.weight_grid.w_len);
  }
  if (j.contains("eos")) c.eos = EosFromJson(j["eos"], c.eos);
  c.seed = j.value("seed", c.seed);
  c.data.Validate();
  c.model.Validate();
  c.train.Validate();
  c.finetune.Validate();
  return c;
}

nlohmann::json HarnessConfig::ToJson() const {
  return {{"workdir", workdir},
          {"data", data},
          {"counts", {{"train", counts.train}, {"dev", counts.dev}, {"test", counts.test}}},
          {"small_vocab", small_vocab},
          {"large_vocab", large_vocab},
          {"lm_order", lm_order},
          {"model", model},
          {"train", train},
          {"finetune", finetune},
          {"decode", DecodeJson(decode)},
          {"weight_grid",
           {{"w_lm", weight_grid.w_lm},
            {"w_char", weight_grid.w_char},
            {"w_s300", weight_grid.w_s300},
            {"w_len", weight_grid.w_len}}},
          {"eos", EosJson(eos)},
          {"seed", seed}};
}

HarnessConfig HarnessConfig::LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad config " + path + ": " + e.what());
  }
}

std::string Workspace::data_dir() const { return (fs::path(root) / "data").string(); }
std::string Workspace::manifest(const std::string& split) const {
  return (fs::path(data_dir()) / (split + ".jsonl")).string();
}
std::string Workspace::vocab(Level level) const {
  return (fs::path(root) / "vocab" / (std::string(LevelName(level)) + ".txt")).string();
}
std::string Workspace::lm() const { return (fs::path(root) / "lm.arpa").string(); }
std::string Workspace::checkpoint() const { return (fs::path(root) / "model.ckpt").string(); }
std::string Workspace::eos_checkpoint() const {
  return (fs::path(root) / "model_eos.ckpt").string();
}
std::string Workspace::weights() const { return (fs::path(root) / "weights.json").string(); }
std::string Workspace::train_log(const std::string& stage) const {
  return (fs::path(root) / (stage + "_log.csv")).string();
}

TokenizerSet BuildTokenizers(const std::vector<std::string>& texts, int small_size,
                             int large_size) {
  TokenizerSet t;
  t.levels[0] = BuildCharVocab(texts);
  t.levels[1] = TrainBpe(texts, small_size, Level::kSubSmall).vocab;
  t.levels[2] = TrainBpe(texts, large_size, Level::kSubLarge).vocab;
  return t;
}

void SaveTokenizers(const TokenizerSet& t, const Workspace& ws) {
  fs::create_directories(fs::path(ws.vocab(Level::kChar)).parent_path());
  for (int k = 0; k < kNumLevels; ++k) t.levels[k].Save(ws.vocab(static_cast<Level>(k)));
}

TokenizerSet LoadTokenizers(const Workspace& ws) {
  TokenizerSet t;
  for (int k = 0; k < kNumLevels; ++k) {
    t.levels[k] = Vocabulary::Load(ws.vocab(static_cast<Level>(k)), static_cast<Level>(k));
  }
  return t;
}

Model CreateModel(ModelConfig config, const TokenizerSet& tokenizers, uint64_t seed) {
  for (int k = 0; k < kNumLevels; ++k) config.vocab[k] = tokenizers.levels[k].size();
  return Model::Build(config, seed);
}

void SaveWeights(const std::string& path, const RescoreWeights& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << nlohmann::json{{"w_lm", w.w_lm}, {"w_char", w.w_char}, {"w_s300", w.w_s300},
                        {"w_len", w.w_len}}.dump(2)
      << '\n';
}

RescoreWeights LoadWeights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  RescoreWeights w;
  w.w_lm = j.value("w_lm", 0.0);
  w.w_char = j.value("w_char", 0.0);
  w.w_s300 = j.value("w_s300", 0.0);
  w.w_len = j.value("w_len", 0.0);
  return w;
}

std::vector<std::string> Texts(const std::vector<ManifestRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(NormalizeText(r.text));
  return out;
}

}  // namespace sasr

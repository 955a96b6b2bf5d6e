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

#ifndef SASR_HARNESS_PIPELINE_H_
#define SASR_HARNESS_PIPELINE_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "sasr/decode/beam_search.h"
#include "sasr/decode/rescore.h"
#include "sasr/endpoint/eos.h"
#include "sasr/harness/synth.h"
#include "sasr/harness/trainer.h"
#include "sasr/model/model.h"
#include "sasr/tokenizer/vocabulary.h"

namespace sasr {

// Everything the end-to-end toy experiment needs, as one JSON document.
struct HarnessConfig {
  std::string workdir = "sasr_work";
  ToyLangSpec data;
  SplitCounts counts;
  int small_vocab = 40;
  int large_vocab = 100;
  int lm_order = 5;
  ModelConfig model;
  TrainConfig train;
  TrainConfig finetune;
  DecodeConfig decode;
  WeightCandidates weight_grid;
  EosConfig eos;
  uint64_t seed = 1;

  HarnessConfig();
  // Defaults overlaid with the keys present in j.
  static HarnessConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
  static HarnessConfig LoadFile(const std::string& path);
};

// Fixed file layout under the work directory.
struct Workspace {
  explicit Workspace(std::string root) : root(std::move(root)) {}
  std::string root;

  std::string data_dir() const;
  std::string manifest(const std::string& split) const;
  std::string vocab(Level level) const;
  std::string lm() const;
  std::string checkpoint() const;
  std::string eos_checkpoint() const;
  std::string weights() const;
  std::string train_log(const std::string& stage) const;
};

TokenizerSet BuildTokenizers(const std::vector<std::string>& texts,
                             int small_size, int large_size);
void SaveTokenizers(const TokenizerSet& t, const Workspace& ws);
TokenizerSet LoadTokenizers(const Workspace& ws);

// Output sizes follow the tokenizers.
Model CreateModel(ModelConfig config, const TokenizerSet& tokenizers, uint64_t seed);

void SaveWeights(const std::string& path, const RescoreWeights& w);
RescoreWeights LoadWeights(const std::string& path);

std::vector<std::string> Texts(const std::vector<ManifestRecord>& records);

}  // namespace sasr

#endif  // SASR_HARNESS_PIPELINE_H_

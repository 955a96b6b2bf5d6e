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

#ifndef SASR_HARNESS_TRAINER_H_
#define SASR_HARNESS_TRAINER_H_

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sasr/ctc/ctc.h"
#include "sasr/frontend/features.h"
#include "sasr/harness/synth.h"
#include "sasr/model/model.h"
#include "sasr/tokenizer/vocabulary.h"

namespace sasr {

struct TrainConfig {
  int iterations = 2000;
  int batch = 4;
  double peak_lr = 2e-3;
  double floor_lr = 1e-4;
  double rise_fraction = 0.15;
  double clip_norm = 5.0;
  HctcConfig hctc;
  bool spec_augment = false;
  SpecAugmentConfig augment;
  // Fine-tuning mode: </s> appended to every level and the early/late
  // penalty added in front of the CTC terms.
  bool eos_targets = false;
  ElPenaltyConfig el;
  int log_every = 50;
  int dev_every = 0;  // 0 disables periodic dev decoding
  int dev_limit = 50;
  uint64_t seed = 1;

  void Validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// One utterance ready for training or scoring.
struct Example {
  std::string id;
  std::string text;
  TensorF base;      // log-mel frames, before stacking
  TensorF features;  // stacked
  LevelTargets targets;
  int endpoint_ms = -1;
};

Example MakeExample(const ManifestRecord& record, const Waveform& wave,
                    const TokenizerSet& tokenizers);
std::vector<Example> LoadExamples(const std::vector<ManifestRecord>& records,
                                  const TokenizerSet& tokenizers);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int iteration, const std::string& what)
      : std::runtime_error("training diverged at iteration " +
                           std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct IterationLog {
  int iteration = 0;  // 1-based
  double loss = 0;    // batch mean
  double lr = 0;
  double grad_norm = 0;
};

struct TrainHooks {
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(int, double)> on_dev_wer;
};

struct TrainSummary {
  std::vector<double> losses;  // per iteration
  int skipped = 0;             // examples with infeasible targets
};

// Level-k row of the endpoint: floor(endpoint_ms / stride_k), clamped.
int EosRefFrame(int endpoint_ms, int level, int frames);

// Mean loss of one example under the training objective.
double ExampleLoss(const Model& model, const TokenizerSet& tokenizers,
                   const Example& ex, const TrainConfig& cfg);

// Adam with a triangular learning-rate cycle and global-norm clipping.
// Throws TrainingDiverged on a non-finite loss.
TrainSummary Train(Model* model, const TokenizerSet& tokenizers,
                   const std::vector<Example>& train,
                   const std::vector<Example>& dev, const TrainConfig& cfg,
                   const TrainHooks& hooks = {});

// Beam-search top-1 without rescoring; used for progress reporting.
double QuickWer(const Model& model, const TokenizerSet& tokenizers,
                const std::vector<Example>& examples, int limit, int beam);

}  // namespace sasr

#endif  // SASR_HARNESS_TRAINER_H_

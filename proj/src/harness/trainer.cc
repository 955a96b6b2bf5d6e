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

#include "sasr/harness/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sasr/decode/beam_search.h"
#include "sasr/diffkern/graph.h"
#include "sasr/diffkern/optimizer.h"
#include "sasr/harness/metrics.h"

namespace sasr {

namespace {

int LevelFrames(const ModelConfig& c, int level, int stacked) {
  if (level < 2) return stacked;
  return (stacked - c.conv_kernel) / c.conv_stride + 1;
}

struct LossGraph {
  Graph graph;
  TensorMap<float> inputs;
};

LossGraph BuildLossGraph(const Model& model, const TokenizerSet& tokenizers,
                         const Example& ex, const TensorF& features,
                         const TrainConfig& cfg) {
  LossGraph lg;
  Graph& g = lg.graph;
  const std::vector<NodeId> logp = model.AddToGraph(&g);
  lg.inputs["features"] = features;
  std::vector<NodeId> ctc_in = logp;
  std::vector<std::vector<int>> targets(kNumLevels);
  std::vector<int> blanks(kNumLevels);
  for (int k = 0; k < kNumLevels; ++k) {
    const Vocabulary& v = tokenizers.levels[k];
    blanks[k] = v.blank_id();
    targets[k] = ex.targets.y[k];
    if (!cfg.eos_targets) continue;
    targets[k].push_back(v.eos_id());
    if (ex.endpoint_ms < 0) {
      throw std::invalid_argument("fine-tuning needs endpoint_ms for " + ex.id);
    }
    const int frames = LevelFrames(model.config(), k, features.rows());
    const std::string name = "el" + std::to_string(k + 1);
    lg.inputs[name] = ElPenaltyMatrix(frames, v.size(), v.eos_id(),
                                      EosRefFrame(ex.endpoint_ms, k, frames), cfg.el);
    ctc_in[k] = g.Add(logp[k], g.Input(name));
  }
  AddHctcLoss(&g, ctc_in, logp, targets, blanks, cfg.hctc);
  return lg;
}

}  // namespace

void TrainConfig::Validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (iterations < 0) fail("iterations must be >= 0");
  if (batch < 1) fail("batch must be >= 1");
  if (!(peak_lr > 0) || !(floor_lr >= 0)) fail("learning rates must be positive");
  if (!(clip_norm > 0)) fail("clip_norm must be positive");
  if (hctc.entropy_weight < 0) fail("entropy weight must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"iterations", c.iterations},
       {"batch", c.batch},
       {"peak_lr", c.peak_lr},
       {"floor_lr", c.floor_lr},
       {"rise_fraction", c.rise_fraction},
       {"clip_norm", c.clip_norm},
       {"entropy_weight", c.hctc.entropy_weight},
       {"level_weights", c.hctc.level_weights},
       {"spec_augment", c.spec_augment},
       {"eos_targets", c.eos_targets},
       {"el_w_early", c.el.w_early},
       {"el_w_late", c.el.w_late},
       {"el_early_grace", c.el.early_grace},
       {"el_late_grace", c.el.late_grace},
       {"log_every", c.log_every},
       {"dev_every", c.dev_every},
       {"dev_limit", c.dev_limit},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.iterations = j.value("iterations", d.iterations);
  c.batch = j.value("batch", d.batch);
  c.peak_lr = j.value("peak_lr", d.peak_lr);
  c.floor_lr = j.value("floor_lr", d.floor_lr);
  c.rise_fraction = j.value("rise_fraction", d.rise_fraction);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.hctc.entropy_weight = j.value("entropy_weight", d.hctc.entropy_weight);
  c.hctc.level_weights = j.value("level_weights", d.hctc.level_weights);
  c.spec_augment = j.value("spec_augment", d.spec_augment);
  c.eos_targets = j.value("eos_targets", d.eos_targets);
  c.el.w_early = j.value("el_w_early", d.el.w_early);
  c.el.w_late = j.value("el_w_late", d.el.w_late);
  c.el.early_grace = j.value("el_early_grace", d.el.early_grace);
  c.el.late_grace = j.value("el_late_grace", d.el.late_grace);
  c.log_every = j.value("log_every", d.log_every);
  c.dev_every = j.value("dev_every", d.dev_every);
  c.dev_limit = j.value("dev_limit", d.dev_limit);
  c.seed = j.value("seed", d.seed);
}

Example MakeExample(const ManifestRecord& record, const Waveform& wave,
                    const TokenizerSet& tokenizers) {
  Example ex;
  ex.id = record.id;
  ex.text = NormalizeText(record.text);
  ex.base = LogMelExtractor().Compute(wave);
  ex.features = StackFrames(ex.base);
  ex.targets = tokenizers.Encode(ex.text);
  ex.endpoint_ms = record.endpoint_ms.value_or(-1);
  return ex;
}

std::vector<Example> LoadExamples(const std::vector<ManifestRecord>& records,
                                  const TokenizerSet& tokenizers) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(MakeExample(r, ReadWav(r.audio), tokenizers));
  }
  return out;
}

int EosRefFrame(int endpoint_ms, int level, int frames) {
  const int t = endpoint_ms / LevelStrideMs(level);
  return std::clamp(t, 0, std::max(0, frames - 1));
}

double ExampleLoss(const Model& model, const TokenizerSet& tokenizers,
                   const Example& ex, const TrainConfig& cfg) {
  LossGraph lg = BuildLossGraph(model, tokenizers, ex, ex.features, cfg);
  const auto ev = Evaluate(lg.graph, lg.inputs, model.params());
  return ev.output("loss").values()[0];
}

TrainSummary Train(Model* model, const TokenizerSet& tokenizers,
                   const std::vector<Example>& train,
                   const std::vector<Example>& dev, const TrainConfig& cfg,
                   const TrainHooks& hooks) {
  cfg.Validate();
  if (train.empty()) throw std::invalid_argument("no training examples");
  TrainSummary summary;
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();
  Adam adam;
  TriangularSchedule sched{cfg.peak_lr, cfg.floor_lr, cfg.rise_fraction,
                           std::max(1, cfg.iterations)};

  for (int it = 0; it < cfg.iterations; ++it) {
    TensorMap<float> grads;
    double loss_sum = 0;
    int used = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Example& ex = train[order[cursor++]];
      TensorF features = ex.features;
      if (cfg.spec_augment) {
        features = StackFrames(SpecAugment(ex.base, cfg.augment, rng()));
      }
      try {
        LossGraph lg = BuildLossGraph(*model, tokenizers, ex, features, cfg);
        const auto ev = Evaluate(lg.graph, lg.inputs, model->params());
        const double loss = ev.output("loss").values()[0];
        if (!std::isfinite(loss)) throw TrainingDiverged(it + 1, "loss is " + std::to_string(loss));
        const auto g = Backward(ev, "loss");
        AccumulateGrads(&grads, g.params, 1.0f / cfg.batch);
        loss_sum += loss;
        ++used;
      } catch (const CtcInfeasibleError&) {
        ++summary.skipped;
      } catch (const NonFiniteError& e) {
        throw TrainingDiverged(it + 1, e.what());
      }
    }
    if (used == 0) continue;
    const double norm = ClipGlobalNorm(&grads, cfg.clip_norm);
    if (!std::isfinite(norm)) throw TrainingDiverged(it + 1, "gradient norm is not finite");
    const double lr = sched.At(it);
    adam.Step(&model->mutable_params(), grads, lr);
    IterationLog log{it + 1, loss_sum / used, lr, norm};
    summary.losses.push_back(log.loss);
    if (hooks.on_iteration) hooks.on_iteration(log);
    if (cfg.dev_every > 0 && !dev.empty() && (it + 1) % cfg.dev_every == 0 &&
        hooks.on_dev_wer) {
      hooks.on_dev_wer(it + 1, QuickWer(*model, tokenizers, dev, cfg.dev_limit, 8));
    }
  }
  return summary;
}

double QuickWer(const Model& model, const TokenizerSet& tokenizers,
                const std::vector<Example>& examples, int limit, int beam) {
  const Vocabulary& top = tokenizers.at(Level::kSubLarge);
  DecodeConfig dc;
  dc.beam = beam;
  WerCounts total;
  const int n = limit > 0 ? std::min<int>(limit, examples.size()) : examples.size();
  for (int i = 0; i < n; ++i) {
    const auto grids = model.ForwardFull(examples[i].features);
    const auto hyps =
        PrefixBeamDecode(grids[2].log_probs, top.blank_id(), top.eos_id(), dc);
    total += AlignWords(examples[i].text, NormalizeText(top.Decode(hyps.front().prefix)));
  }
  return total.wer();
}

}  // namespace sasr

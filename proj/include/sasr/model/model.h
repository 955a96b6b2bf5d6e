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

#ifndef SASR_MODEL_MODEL_H_
#define SASR_MODEL_MODEL_H_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sasr/diffkern/frame_rows.h"
#include "sasr/diffkern/graph.h"
#include "sasr/diffkern/tensor.h"

namespace sasr {

struct ModelConfig {
  std::array<int, 3> layers = {2, 2, 1};
  int hidden = 128;
  int heads = 4;
  int head_dim = 32;
  int radius = 2;
  int conv_kernel = 5;
  int conv_stride = 3;
  std::array<int, 3> vocab = {12, 40, 100};
  int feature_dim = 400;
  // Ablation switches.
  int num_levels = 3;
  bool use_skip = true;
  bool use_attention = true;
  double ln_eps = 1e-5;

  static ModelConfig Toy() { return {}; }
  static ModelConfig FullSize();

  int attention_width() const { return heads * head_dim; }
  // Throws std::invalid_argument describing the first inconsistency.
  void Validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Per-level T x V log-probabilities. Rows may be empty while streaming.
struct PosteriorGrid {
  int level = 0;  // 0-based
  FrameRows log_probs;
  int frame_stride_ms = 30;

  int rows() const { return log_probs.rows(); }
  int vocab() const { return log_probs.dim(); }
  const float* row(int t) const { return log_probs.row(t); }
};

int LevelStrideMs(int level);

class Model {
 public:
  static Model Build(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const TensorMap<float>& params() const { return params_; }
  TensorMap<float>& mutable_params() { return params_; }
  int64_t ParamCount() const;

  // Appends the network to g, reading the "features" input. Returns one
  // log-probability node per level, also registered as outputs "logp1"...
  std::vector<NodeId> AddToGraph(Graph* g) const;

  // Throws ShapeError when the utterance is too short for the top level.
  std::vector<PosteriorGrid> ForwardFull(const TensorF& features) const;

  // The metadata stored with the weights is {"model": config} merged with
  // extra.
  void Save(const std::string& path,
            const nlohmann::json& extra = nlohmann::json::object()) const;
  static Model Load(const std::string& path,
                    nlohmann::json* metadata = nullptr);

 private:
  ModelConfig config_;
  TensorMap<float> params_;
};

class RowStage;

// Incremental forward pass for one session. Emitted rows, concatenated over
// all Push calls and the final Flush, equal ForwardFull's grids.
class ModelStream {
 public:
  explicit ModelStream(const Model& model);
  ~ModelStream();
  ModelStream(ModelStream&&) noexcept;

  // Per-level rows newly emitted by this call.
  using Emission = std::vector<FrameRows>;

  Emission Push(const FrameRows& features);
  // Emits the right-edge rows held back for lookahead. The stream cannot be
  // used afterwards.
  Emission Flush();

  bool flushed() const { return flushed_; }
  int frames_consumed() const { return frames_consumed_; }
  const std::vector<int>& rows_emitted() const { return rows_emitted_; }

 private:
  Emission Run(const FrameRows& features, bool flush);

  const Model* model_;
  struct Level {
    std::vector<std::unique_ptr<RowStage>> block;
    std::unique_ptr<RowStage> head;
  };
  std::vector<Level> levels_;
  std::unique_ptr<RowStage> conv_;
  bool flushed_ = false;
  int frames_consumed_ = 0;
  std::vector<int> rows_emitted_;
};

}  // namespace sasr

#endif  // SASR_MODEL_MODEL_H_

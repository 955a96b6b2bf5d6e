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

#include "sasr/model/model.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "sasr/diffkern/checkpoint.h"
#include "sasr/diffkern/kernels.h"

namespace sasr {

namespace {

std::string P(int level, const std::string& name) {
  return "l" + std::to_string(level + 1) + "." + name;
}

std::string Idx(const std::string& base, int i) {
  return base + std::to_string(i);
}

// Parameter shapes with their fan-in (0 marks a layer-norm gain, -1 a
// layer-norm bias).
struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in;
};

std::vector<ParamSpec> Specs(const ModelConfig& c) {
  std::vector<ParamSpec> specs;
  auto linear = [&](const std::string& w, const std::string& b, int in,
                    int out) {
    specs.push_back({w, {in, out}, in});
    specs.push_back({b, {out}, in});
  };
  auto norm = [&](const std::string& base) {
    specs.push_back({base + ".g", {c.hidden}, 0});
    specs.push_back({base + ".b", {c.hidden}, -1});
  };
  const int h = c.hidden;
  const int a = c.attention_width();
  for (int l = 0; l < c.num_levels; ++l) {
    int in = l == 0 ? c.feature_dim : h;
    if (c.layers[l] == 0) {
      linear(P(l, "proj.w"), P(l, "proj.b"), in, h);
    }
    for (int i = 0; i < c.layers[l]; ++i) {
      const std::string base = P(l, Idx("lstm", i));
      specs.push_back({base + ".w_ih", {in, 4 * h}, in});
      specs.push_back({base + ".w_hh", {h, 4 * h}, h});
      specs.push_back({base + ".b", {4 * h}, h});
      norm(P(l, Idx("norm", i)));
      in = h;
    }
    if (c.use_attention) {
      linear(P(l, "att.wq"), P(l, "att.bq"), h, a);
      linear(P(l, "att.wk"), P(l, "att.bk"), h, a);
      linear(P(l, "att.wv"), P(l, "att.bv"), h, a);
      linear(P(l, "att.wo"), P(l, "att.bo"), a, h);
      linear(P(l, "att.wf"), P(l, "att.bf"), h, h);
      norm(P(l, "att_norm"));
    }
    if (l == 1 && c.num_levels == 3) {
      linear("conv.w", "conv.b", c.conv_kernel * h, h);
    }
    linear(Idx("head", l + 1) + ".w", Idx("head", l + 1) + ".b", h,
           c.vocab[l]);
  }
  return specs;
}

}  // namespace

ModelConfig ModelConfig::FullSize() {
  ModelConfig c;
  c.layers = {5, 5, 2};
  c.hidden = 700;
  c.heads = 8;
  c.head_dim = 64;
  c.vocab = {74, 301, 5001};
  return c;
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (num_levels < 1 || num_levels > 3) fail("num_levels must be 1, 2 or 3");
  if (hidden <= 0 || feature_dim <= 0) fail("hidden and feature dims must be positive");
  if (heads <= 0 || head_dim <= 0) fail("attention heads and head dim must be positive");
  if (radius < 0) fail("attention window radius must be >= 0");
  if (conv_kernel <= 0 || conv_stride <= 0) fail("conv kernel and stride must be positive");
  for (int l = 0; l < num_levels; ++l) {
    if (layers[l] < 0) fail("negative layer count at level " + std::to_string(l + 1));
    if (vocab[l] < 2) fail("vocabulary at level " + std::to_string(l + 1) + " too small");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"layers", c.layers},
                     {"hidden", c.hidden},
                     {"heads", c.heads},
                     {"head_dim", c.head_dim},
                     {"radius", c.radius},
                     {"conv_kernel", c.conv_kernel},
                     {"conv_stride", c.conv_stride},
                     {"vocab", c.vocab},
                     {"feature_dim", c.feature_dim},
                     {"num_levels", c.num_levels},
                     {"use_skip", c.use_skip},
                     {"use_attention", c.use_attention},
                     {"ln_eps", c.ln_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.layers = j.value("layers", d.layers);
  c.hidden = j.value("hidden", d.hidden);
  c.heads = j.value("heads", d.heads);
  c.head_dim = j.value("head_dim", d.head_dim);
  c.radius = j.value("radius", d.radius);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  c.conv_stride = j.value("conv_stride", d.conv_stride);
  c.vocab = j.value("vocab", d.vocab);
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  c.num_levels = j.value("num_levels", d.num_levels);
  c.use_skip = j.value("use_skip", d.use_skip);
  c.use_attention = j.value("use_attention", d.use_attention);
  c.ln_eps = j.value("ln_eps", d.ln_eps);
}

int LevelStrideMs(int level) { return level == 2 ? 90 : 30; }

Model Model::Build(const ModelConfig& config, uint64_t seed) {
  config.Validate();
  Model m;
  m.config_ = config;
  std::mt19937_64 rng(seed);
  for (const auto& spec : Specs(config)) {
    TensorF t(spec.shape);
    if (spec.fan_in == 0) {
      t.Fill(1.f);
    } else if (spec.fan_in > 0) {
      const float bound = 1.f / std::sqrt(static_cast<float>(spec.fan_in));
      std::uniform_real_distribution<float> d(-bound, bound);
      for (auto& v : t.values()) v = d(rng);
    }
    m.params_.emplace(spec.name, std::move(t));
  }
  return m;
}

int64_t Model::ParamCount() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += static_cast<int64_t>(t.size());
  return n;
}

std::vector<NodeId> Model::AddToGraph(Graph* g) const {
  const ModelConfig& c = config_;
  auto linear = [&](NodeId x, const std::string& w, const std::string& b) {
    return g->Add(g->MatMul(x, g->Param(w)), g->Param(b));
  };
  auto norm = [&](NodeId x, const std::string& base) {
    return g->LayerNorm(x, g->Param(base + ".g"), g->Param(base + ".b"),
                        c.ln_eps);
  };
  NodeId x = g->Input("features");
  std::vector<NodeId> heads;
  for (int l = 0; l < c.num_levels; ++l) {
    if (l == 2) {
      x = g->Conv1d(x, g->Param("conv.w"), g->Param("conv.b"), c.conv_kernel,
                    c.conv_stride);
    }
    int in = l == 0 ? c.feature_dim : c.hidden;
    if (c.layers[l] == 0) x = linear(x, P(l, "proj.w"), P(l, "proj.b"));
    for (int i = 0; i < c.layers[l]; ++i) {
      const std::string base = P(l, Idx("lstm", i));
      NodeId h = g->Lstm(x, g->Param(base + ".w_ih"), g->Param(base + ".w_hh"),
                         g->Param(base + ".b"));
      if (c.use_skip && in == c.hidden) h = g->Add(x, h);
      x = norm(h, P(l, Idx("norm", i)));
      in = c.hidden;
    }
    if (c.use_attention) {
      NodeId q = linear(x, P(l, "att.wq"), P(l, "att.bq"));
      NodeId k = linear(x, P(l, "att.wk"), P(l, "att.bk"));
      NodeId v = linear(x, P(l, "att.wv"), P(l, "att.bv"));
      NodeId a = g->WindowAttention(q, k, v, c.heads, c.radius);
      NodeId p = linear(a, P(l, "att.wo"), P(l, "att.bo"));
      NodeId f = g->Relu(linear(p, P(l, "att.wf"), P(l, "att.bf")));
      if (c.use_skip) f = g->Add(x, f);
      x = norm(f, P(l, "att_norm"));
    }
    const std::string head = Idx("head", l + 1);
    NodeId lp = g->LogSoftmax(linear(x, head + ".w", head + ".b"));
    g->SetOutput(Idx("logp", l + 1), lp);
    heads.push_back(lp);
  }
  return heads;
}

std::vector<PosteriorGrid> Model::ForwardFull(const TensorF& features) const {
  if (features.rank() != 2 || features.cols() != config_.feature_dim) {
    throw ShapeError("features must be T x " +
                     std::to_string(config_.feature_dim) + ", got " +
                     ShapeToString(features.shape()));
  }
  if (config_.num_levels == 3 && features.rows() < config_.conv_kernel) {
    throw ShapeError("utterance of " + std::to_string(features.rows()) +
                     " frames is too short for the top level (needs " +
                     std::to_string(config_.conv_kernel) + ")");
  }
  Graph g;
  const std::vector<NodeId> heads = AddToGraph(&g);
  TensorMap<float> inputs;
  inputs.emplace("features", features);
  Evaluation<float> eval = Evaluate<float>(g, inputs, params_);
  std::vector<PosteriorGrid> grids;
  for (int l = 0; l < static_cast<int>(heads.size()); ++l) {
    grids.push_back({l, FrameRows::FromTensor(eval.value(heads[l])),
                     LevelStrideMs(l)});
  }
  return grids;
}

void Model::Save(const std::string& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra;
  meta["model"] = config_;
  WriteCheckpoint(path, {meta.dump(), params_});
}

Model Model::Load(const std::string& path, nlohmann::json* metadata) {
  Checkpoint ckpt = ReadCheckpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": unreadable checkpoint metadata: " +
                             e.what());
  }
  if (!meta.contains("model")) {
    throw std::runtime_error(path + ": checkpoint has no model config");
  }
  Model m;
  m.config_ = meta["model"].get<ModelConfig>();
  m.config_.Validate();
  for (const auto& spec : Specs(m.config_)) {
    auto it = ckpt.tensors.find(spec.name);
    if (it == ckpt.tensors.end()) {
      throw std::runtime_error(path + ": missing tensor " + spec.name);
    }
    if (it->second.shape() != spec.shape) {
      throw std::runtime_error(path + ": tensor " + spec.name + " has shape " +
                               ShapeToString(it->second.shape()) +
                               ", expected " + ShapeToString(spec.shape));
    }
    m.params_.emplace(spec.name, std::move(it->second));
  }
  if (metadata != nullptr) *metadata = std::move(meta);
  return m;
}

// ---------------------------------------------------------------------------
// Streaming. Every stage computes rows with the same kernels, in the same
// per-element order, as the corresponding graph ops.

class RowStage {
 public:
  virtual ~RowStage() = default;
  virtual FrameRows Push(const FrameRows& in) = 0;
  virtual FrameRows Flush() { return FrameRows(out_dim()); }
  virtual int out_dim() const = 0;
};

namespace {

const TensorF& Get(const TensorMap<float>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw std::runtime_error("missing parameter " + name);
  return it->second;
}

void LinearRow(const float* x, const TensorF& w, const TensorF& b, float* y) {
  const int in = w.dim(0);
  const int out = w.dim(1);
  kernels::Gemm(x, in, w.data(), y, 1, in, out, false);
  kernels::AddBiasRows(y, b.data(), 1, out);
}

class LinearStage : public RowStage {
 public:
  LinearStage(const TensorF& w, const TensorF& b) : w_(w), b_(b) {}
  FrameRows Push(const FrameRows& in) override {
    FrameRows out(out_dim());
    for (int r = 0; r < in.rows(); ++r) {
      LinearRow(in.row(r), w_, b_, out.AddRows(1));
    }
    return out;
  }
  int out_dim() const override { return w_.dim(1); }

 private:
  const TensorF& w_;
  const TensorF& b_;
};

class HeadStage : public LinearStage {
 public:
  using LinearStage::LinearStage;
  FrameRows Push(const FrameRows& in) override {
    FrameRows logits = LinearStage::Push(in);
    FrameRows out(out_dim());
    for (int r = 0; r < logits.rows(); ++r) {
      kernels::LogSoftmaxRow(logits.row(r), out.AddRows(1), out_dim());
    }
    return out;
  }
};

class LstmStage : public RowStage {
 public:
  LstmStage(const TensorMap<float>& p, const std::string& base,
            const std::string& norm, bool skip, float eps)
      : w_ih_(Get(p, base + ".w_ih")),
        w_hh_(Get(p, base + ".w_hh")),
        b_(Get(p, base + ".b")),
        g_(Get(p, norm + ".g")),
        beta_(Get(p, norm + ".b")),
        hidden_(w_hh_.dim(0)),
        skip_(skip && w_ih_.dim(0) == hidden_),
        eps_(eps),
        h_(hidden_, 0.f),
        c_(hidden_, 0.f),
        z_(4 * hidden_),
        sum_(hidden_) {}

  FrameRows Push(const FrameRows& in) override {
    FrameRows out(hidden_);
    for (int r = 0; r < in.rows(); ++r) {
      LinearRow(in.row(r), w_ih_, b_, z_.data());
      kernels::LstmStep(z_.data(), w_hh_.data(), hidden_, h_.data(),
                        c_.data());
      const float* y = h_.data();
      if (skip_) {
        for (int j = 0; j < hidden_; ++j) sum_[j] = in.row(r)[j] + h_[j];
        y = sum_.data();
      }
      kernels::LayerNormRow<float>(y, g_.data(), beta_.data(), eps_, hidden_,
                            out.AddRows(1), nullptr, nullptr);
    }
    return out;
  }
  int out_dim() const override { return hidden_; }

 private:
  const TensorF& w_ih_;
  const TensorF& w_hh_;
  const TensorF& b_;
  const TensorF& g_;
  const TensorF& beta_;
  int hidden_;
  bool skip_;
  float eps_;
  std::vector<float> h_, c_, z_, sum_;
};

// Windowed attention sub-block. Row t is held back until row t + radius has
// arrived, or until the flush truncates the window at the sequence end.
class AttentionStage : public RowStage {
 public:
  AttentionStage(const TensorMap<float>& p, int level, int heads, int radius,
                 bool skip, float eps)
      : wq_(Get(p, P(level, "att.wq"))),
        bq_(Get(p, P(level, "att.bq"))),
        wk_(Get(p, P(level, "att.wk"))),
        bk_(Get(p, P(level, "att.bk"))),
        wv_(Get(p, P(level, "att.wv"))),
        bv_(Get(p, P(level, "att.bv"))),
        wo_(Get(p, P(level, "att.wo"))),
        bo_(Get(p, P(level, "att.bo"))),
        wf_(Get(p, P(level, "att.wf"))),
        bf_(Get(p, P(level, "att.bf"))),
        g_(Get(p, P(level, "att_norm.g"))),
        beta_(Get(p, P(level, "att_norm.b"))),
        heads_(heads),
        radius_(radius),
        skip_(skip),
        eps_(eps),
        hidden_(wq_.dim(0)),
        width_(wq_.dim(1)),
        x_(hidden_),
        q_(width_),
        k_(width_),
        v_(width_) {}

  FrameRows Push(const FrameRows& in) override {
    for (int r = 0; r < in.rows(); ++r) {
      x_.AppendRow(in.row(r));
      LinearRow(in.row(r), wq_, bq_, q_.AddRows(1));
      LinearRow(in.row(r), wk_, bk_, k_.AddRows(1));
      LinearRow(in.row(r), wv_, bv_, v_.AddRows(1));
      ++received_;
    }
    return Emit(received_ - radius_, received_ - 1);
  }

  FrameRows Flush() override { return Emit(received_, received_ - 1); }

  int out_dim() const override { return hidden_; }

 private:
  // Emits rows [emitted_, end) with windows clipped to last_row.
  FrameRows Emit(int end, int last_row) {
    FrameRows out(hidden_);
    std::vector<float> att(width_), proj(hidden_), ff(hidden_);
    for (; emitted_ < end; ++emitted_) {
      const int t = emitted_;
      const int lo = std::max(0, t - radius_);
      const int hi = std::min(last_row, t + radius_);
      kernels::AttendRow<float>(q_.row(t - start_), k_.data(), v_.data(), width_,
                         heads_, lo - start_, hi - start_, att.data(),
                         nullptr);
      LinearRow(att.data(), wo_, bo_, proj.data());
      LinearRow(proj.data(), wf_, bf_, ff.data());
      for (auto& f : ff) f = f > 0.f ? f : 0.f;
      if (skip_) {
        const float* x = x_.row(t - start_);
        for (int j = 0; j < hidden_; ++j) ff[j] = x[j] + ff[j];
      }
      kernels::LayerNormRow<float>(ff.data(), g_.data(), beta_.data(), eps_, hidden_,
                            out.AddRows(1), nullptr, nullptr);
    }
    const int keep = std::max(start_, emitted_ - radius_);
    if (keep > start_) {
      const int drop = keep - start_;
      x_.DropFront(drop);
      q_.DropFront(drop);
      k_.DropFront(drop);
      v_.DropFront(drop);
      start_ = keep;
    }
    return out;
  }

  const TensorF &wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_, &wf_, &bf_;
  const TensorF &g_, &beta_;
  int heads_, radius_;
  bool skip_;
  float eps_;
  int hidden_, width_;
  FrameRows x_, q_, k_, v_;
  int start_ = 0;  // absolute index of the first buffered row
  int received_ = 0;
  int emitted_ = 0;
};

// Valid strided convolution over time.
class ConvStage : public RowStage {
 public:
  ConvStage(const TensorF& w, const TensorF& b, int kernel, int stride)
      : w_(w), b_(b), kernel_(kernel), stride_(stride),
        channels_(w.dim(0) / kernel), buf_(channels_) {}

  FrameRows Push(const FrameRows& in) override {
    buf_.Append(in);
    received_ += in.rows();
    FrameRows out(out_dim());
    while (stride_ * emitted_ + kernel_ <= received_) {
      const float* x = buf_.row(stride_ * emitted_ - start_);
      float* y = out.AddRows(1);
      kernels::Gemm(x, stride_ * channels_, w_.data(), y, 1,
                    kernel_ * channels_, out_dim(), false);
      kernels::AddBiasRows(y, b_.data(), 1, out_dim());
      ++emitted_;
    }
    const int keep = std::min(stride_ * emitted_, received_);
    if (keep > start_) {
      buf_.DropFront(keep - start_);
      start_ = keep;
    }
    return out;
  }
  int out_dim() const override { return w_.dim(1); }

 private:
  const TensorF& w_;
  const TensorF& b_;
  int kernel_, stride_, channels_;
  FrameRows buf_;
  int start_ = 0;
  int received_ = 0;
  int emitted_ = 0;
};

}  // namespace

ModelStream::ModelStream(const Model& model) : model_(&model) {
  const ModelConfig& c = model.config();
  const auto& p = model.params();
  const float eps = static_cast<float>(c.ln_eps);
  for (int l = 0; l < c.num_levels; ++l) {
    Level level;
    if (c.layers[l] == 0) {
      level.block.push_back(std::make_unique<LinearStage>(
          Get(p, P(l, "proj.w")), Get(p, P(l, "proj.b"))));
    }
    for (int i = 0; i < c.layers[l]; ++i) {
      level.block.push_back(std::make_unique<LstmStage>(
          p, P(l, Idx("lstm", i)), P(l, Idx("norm", i)), c.use_skip, eps));
    }
    if (c.use_attention) {
      level.block.push_back(std::make_unique<AttentionStage>(
          p, l, c.heads, c.radius, c.use_skip, eps));
    }
    const std::string head = Idx("head", l + 1);
    level.head = std::make_unique<HeadStage>(Get(p, head + ".w"),
                                             Get(p, head + ".b"));
    levels_.push_back(std::move(level));
  }
  if (c.num_levels == 3) {
    conv_ = std::make_unique<ConvStage>(Get(p, "conv.w"), Get(p, "conv.b"),
                                        c.conv_kernel, c.conv_stride);
  }
  rows_emitted_.assign(c.num_levels, 0);
}

ModelStream::~ModelStream() = default;
ModelStream::ModelStream(ModelStream&&) noexcept = default;

ModelStream::Emission ModelStream::Push(const FrameRows& features) {
  if (!features.empty() && features.dim() != model_->config().feature_dim) {
    throw ShapeError("feature chunk has dim " +
                     std::to_string(features.dim()) + ", expected " +
                     std::to_string(model_->config().feature_dim));
  }
  return Run(features, false);
}

ModelStream::Emission ModelStream::Flush() {
  Emission e = Run(FrameRows(model_->config().feature_dim), true);
  flushed_ = true;
  return e;
}

ModelStream::Emission ModelStream::Run(const FrameRows& features, bool flush) {
  if (flushed_) throw std::logic_error("model stream used after flush");
  frames_consumed_ += features.rows();
  Emission out;
  FrameRows x = features;
  for (size_t l = 0; l < levels_.size(); ++l) {
    if (l == 2) x = conv_->Push(x);
    for (auto& stage : levels_[l].block) {
      FrameRows y = stage->Push(x);
      if (flush) y.Append(stage->Flush());
      x = std::move(y);
    }
    out.push_back(levels_[l].head->Push(x));
    rows_emitted_[l] += out.back().rows();
  }
  return out;
}

}  // namespace sasr

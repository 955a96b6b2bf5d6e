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

#include "sasr/ctc/ctc.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Blank-augmented label sequence: blank, l1, blank, l2, ..., blank.
std::vector<int> Expand(const std::vector<int>& labels, int blank) {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

// Whether state s may be entered from s - 2 (skipping a blank).
bool CanSkip(const std::vector<int>& ext, int s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

template <typename T>
void CheckInputs(const Tensor<T>& logp, const std::vector<int>& labels,
                 int blank) {
  if (logp.rank() != 2) throw ShapeError("CTC expects a T x V matrix");
  if (labels.empty()) throw std::invalid_argument("CTC needs at least one label");
  const int v = logp.cols();
  if (blank < 0 || blank >= v) throw std::invalid_argument("blank id out of range");
  for (int l : labels) {
    if (l < 0 || l >= v || l == blank) {
      throw std::invalid_argument("label id " + std::to_string(l) +
                                  " invalid for vocabulary of " +
                                  std::to_string(v));
    }
  }
  const int need = CtcMinFrames(labels);
  if (logp.rows() < need) {
    throw CtcInfeasibleError(std::to_string(labels.size()) +
                             " labels need at least " + std::to_string(need) +
                             " frames, grid has " +
                             std::to_string(logp.rows()));
  }
}

}  // namespace

int CtcMinFrames(const std::vector<int>& labels) {
  int n = static_cast<int>(labels.size());
  for (size_t i = 1; i < labels.size(); ++i) n += labels[i] == labels[i - 1];
  return n;
}

template <typename T>
double CtcLoss(const Tensor<T>& logp, const std::vector<int>& labels,
               int blank, Tensor<T>* grad) {
  CheckInputs(logp, labels, blank);
  const int frames = logp.rows();
  const std::vector<int> ext = Expand(labels, blank);
  const int states = static_cast<int>(ext.size());
  std::vector<double> alpha(static_cast<size_t>(frames) * states, kNegInf);
  auto a = [&](int t, int s) -> double& { return alpha[t * states + s]; };
  a(0, 0) = logp.at(0, ext[0]);
  a(0, 1) = logp.at(0, ext[1]);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < states; ++s) {
      double acc = a(t - 1, s);
      if (s >= 1) acc = LogAdd(acc, a(t - 1, s - 1));
      if (CanSkip(ext, s, blank)) acc = LogAdd(acc, a(t - 1, s - 2));
      if (acc != kNegInf) a(t, s) = acc + logp.at(t, ext[s]);
    }
  }
  const double log_z = LogAdd(a(frames - 1, states - 1), a(frames - 1, states - 2));
  if (!std::isfinite(log_z)) {
    throw CtcInfeasibleError("no alignment has non-zero probability");
  }
  if (grad != nullptr) {
    std::vector<double> beta(static_cast<size_t>(frames) * states, kNegInf);
    auto b = [&](int t, int s) -> double& { return beta[t * states + s]; };
    b(frames - 1, states - 1) = logp.at(frames - 1, ext[states - 1]);
    b(frames - 1, states - 2) = logp.at(frames - 1, ext[states - 2]);
    for (int t = frames - 2; t >= 0; --t) {
      for (int s = 0; s < states; ++s) {
        double acc = b(t + 1, s);
        if (s + 1 < states) acc = LogAdd(acc, b(t + 1, s + 1));
        if (s + 2 < states && CanSkip(ext, s + 2, blank)) {
          acc = LogAdd(acc, b(t + 1, s + 2));
        }
        if (acc != kNegInf) b(t, s) = acc + logp.at(t, ext[s]);
      }
    }
    *grad = Tensor<T>(logp.shape());
    // Both alpha and beta include the emission at t, hence the subtraction.
    std::vector<double> occ(logp.cols());
    for (int t = 0; t < frames; ++t) {
      std::fill(occ.begin(), occ.end(), kNegInf);
      for (int s = 0; s < states; ++s) {
        occ[ext[s]] = LogAdd(occ[ext[s]], a(t, s) + b(t, s));
      }
      for (int k = 0; k < logp.cols(); ++k) {
        if (occ[k] == kNegInf) continue;
        grad->at(t, k) = static_cast<T>(
            -std::exp(occ[k] - static_cast<double>(logp.at(t, k)) - log_z));
      }
    }
  }
  return -log_z;
}

template double CtcLoss<float>(const TensorF&, const std::vector<int>&, int,
                               TensorF*);
template double CtcLoss<double>(const TensorD&, const std::vector<int>&, int,
                                TensorD*);

namespace {

class CtcOp : public CustomOp {
 public:
  CtcOp(std::vector<int> labels, int blank)
      : labels_(std::move(labels)), blank_(blank) {}

  std::string name() const override { return "ctc"; }

  TensorF Forward(std::span<const TensorF* const> in,
                  std::vector<TensorF>* aux) const override {
    return Run(in, aux);
  }
  TensorD Forward(std::span<const TensorD* const> in,
                  std::vector<TensorD>* aux) const override {
    return Run(in, aux);
  }
  void Backward(std::span<const TensorF* const>, const TensorF&,
                const std::vector<TensorF>& aux, const TensorF& grad_out,
                std::span<TensorF* const> grad_in) const override {
    Accumulate(aux, grad_out, grad_in);
  }
  void Backward(std::span<const TensorD* const>, const TensorD&,
                const std::vector<TensorD>& aux, const TensorD& grad_out,
                std::span<TensorD* const> grad_in) const override {
    Accumulate(aux, grad_out, grad_in);
  }

 private:
  template <typename T>
  Tensor<T> Run(std::span<const Tensor<T>* const> in,
                std::vector<Tensor<T>>* aux) const {
    Tensor<T> grad;
    const double loss = CtcLoss(*in[0], labels_, blank_, &grad);
    aux->push_back(std::move(grad));
    return Tensor<T>::Scalar(static_cast<T>(loss));
  }

  template <typename T>
  static void Accumulate(const std::vector<Tensor<T>>& aux,
                         const Tensor<T>& grad_out,
                         std::span<Tensor<T>* const> grad_in) {
    const T g = grad_out[0];
    const Tensor<T>& local = aux[0];
    Tensor<T>& dst = *grad_in[0];
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += g * local[i];
  }

  std::vector<int> labels_;
  int blank_;
};

}  // namespace

std::shared_ptr<const CustomOp> MakeCtcOp(std::vector<int> labels, int blank) {
  return std::make_shared<CtcOp>(std::move(labels), blank);
}

template <typename T>
double EntropyTerm(const Tensor<T>& logp) {
  double h = 0;
  for (T v : logp.values()) {
    const double p = std::exp(static_cast<double>(v));
    if (p > 0) h -= p * static_cast<double>(v);
  }
  return h;
}

template double EntropyTerm<float>(const TensorF&);
template double EntropyTerm<double>(const TensorD&);

NodeId AddEntropy(Graph* g, NodeId logp) {
  return g->Scale(g->Sum(g->Mul(g->Exp(logp), logp)), -1.0);
}

HctcNodes AddHctcLoss(Graph* g, const std::vector<NodeId>& ctc_inputs,
                      const std::vector<NodeId>& entropy_inputs,
                      const std::vector<std::vector<int>>& targets,
                      const std::vector<int>& blanks, const HctcConfig& cfg) {
  if (ctc_inputs.size() != targets.size() ||
      entropy_inputs.size() != targets.size() ||
      blanks.size() != targets.size()) {
    throw std::invalid_argument("one target sequence per level expected");
  }
  HctcNodes nodes;
  for (size_t k = 0; k < targets.size(); ++k) {
    const std::string suffix = std::to_string(k + 1);
    NodeId c = g->Custom(MakeCtcOp(targets[k], blanks[k]), {ctc_inputs[k]});
    NodeId e = AddEntropy(g, entropy_inputs[k]);
    g->SetOutput("ctc" + suffix, c);
    g->SetOutput("ent" + suffix, e);
    nodes.ctc.push_back(c);
    nodes.entropy.push_back(e);
    NodeId term = c;
    if (cfg.entropy_weight != 0) {
      term = g->Add(c, g->Scale(e, -cfg.entropy_weight));
    }
    if (cfg.level_weights[k] != 1.0) term = g->Scale(term, cfg.level_weights[k]);
    nodes.total = nodes.total < 0 ? term : g->Add(nodes.total, term);
  }
  g->SetOutput("loss", nodes.total);
  return nodes;
}

double HctcLoss(const std::vector<TensorD>& logp,
                const std::vector<std::vector<int>>& targets,
                const std::vector<int>& blanks, const HctcConfig& cfg) {
  double total = 0;
  for (size_t k = 0; k < logp.size(); ++k) {
    double term = CtcLoss(logp[k], targets[k], blanks[k]);
    if (cfg.entropy_weight != 0) {
      term += -cfg.entropy_weight * EntropyTerm(logp[k]);
    }
    if (cfg.level_weights[k] != 1.0) term *= cfg.level_weights[k];
    total = k == 0 ? term : total + term;
  }
  return total;
}

AlignmentResult ForcedAlign(const TensorF& logp,
                            const std::vector<int>& labels, int blank,
                            int frame_ms) {
  CheckInputs(logp, labels, blank);
  const int frames = logp.rows();
  const std::vector<int> ext = Expand(labels, blank);
  const int states = static_cast<int>(ext.size());
  std::vector<double> delta(static_cast<size_t>(frames) * states, kNegInf);
  std::vector<int> from(static_cast<size_t>(frames) * states, -1);
  auto d = [&](int t, int s) -> double& { return delta[t * states + s]; };
  d(0, 0) = logp.at(0, ext[0]);
  d(0, 1) = logp.at(0, ext[1]);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < states; ++s) {
      // Candidates from the highest predecessor down; a later candidate
      // must be strictly better to win, so ties favor advancing.
      int best = -1;
      double best_v = kNegInf;
      for (int p = s; p >= std::max(0, s - 2); --p) {
        if (p == s - 2 && !CanSkip(ext, s, blank)) continue;
        const double v = d(t - 1, p);
        if (v == kNegInf) continue;
        if (best < 0 || v > best_v || (v == best_v && p > best)) {
          best = p;
          best_v = v;
        }
      }
      if (best >= 0) {
        d(t, s) = best_v + logp.at(t, ext[s]);
        from[t * states + s] = best;
      }
    }
  }
  int s = states - 1;
  if (d(frames - 1, states - 2) > d(frames - 1, states - 1)) s = states - 2;
  AlignmentResult r;
  r.path_log_prob = d(frames - 1, s);
  if (r.path_log_prob == kNegInf) {
    throw CtcInfeasibleError("no alignment has non-zero probability");
  }
  r.path.assign(frames, blank);
  for (int t = frames - 1; t >= 0; --t) {
    r.path[t] = ext[s];
    if (r.endpoint_frame < 0 && ext[s] != blank) r.endpoint_frame = t;
    if (t > 0) s = from[t * states + s];
  }
  r.endpoint_ms = (r.endpoint_frame + 1) * frame_ms;
  return r;
}

TensorF ElPenaltyMatrix(int frames, int vocab, int eos_id, int eos_ref_frame,
                        const ElPenaltyConfig& cfg) {
  if (eos_id < 0 || eos_id >= vocab) {
    throw std::invalid_argument("vocabulary has no </s> column");
  }
  TensorF pen({frames, vocab});
  for (int t = 0; t < frames; ++t) {
    const double early = std::max(0, eos_ref_frame - cfg.early_grace - t);
    const double late = std::max(0, t - eos_ref_frame - cfg.late_grace);
    pen.at(t, eos_id) =
        static_cast<float>(-cfg.w_early * early - cfg.w_late * late);
  }
  return pen;
}

void ElAugment(TensorF* logp, int eos_id, int eos_ref_frame,
               const ElPenaltyConfig& cfg) {
  const TensorF pen =
      ElPenaltyMatrix(logp->rows(), logp->cols(), eos_id, eos_ref_frame, cfg);
  for (int t = 0; t < logp->rows(); ++t) logp->at(t, eos_id) += pen.at(t, eos_id);
}

std::string AlignmentLine(const std::string& id, const AlignmentResult& a) {
  std::ostringstream out;
  out << id << ' ' << a.endpoint_ms;
  for (size_t i = 0; i < a.path.size();) {
    size_t j = i;
    while (j < a.path.size() && a.path[j] == a.path[i]) ++j;
    out << ' ' << a.path[i] << ':' << (j - i);
    i = j;
  }
  return out.str();
}

}  // namespace sasr

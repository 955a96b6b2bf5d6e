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

#ifndef SASR_DIFFKERN_FRAME_ROWS_H_
#define SASR_DIFFKERN_FRAME_ROWS_H_

#include <span>
#include <stdexcept>
#include <vector>

#include "sasr/diffkern/tensor.h"

namespace sasr {

// Growable row-major matrix of float frames; unlike Tensor it may hold zero
// rows, which is the common case for a streaming step.
class FrameRows {
 public:
  FrameRows() = default;
  explicit FrameRows(int dim) : dim_(dim) {}
  FrameRows(int dim, std::vector<float> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ <= 0 || data_.size() % dim_ != 0) {
      throw std::invalid_argument("frame data is not a whole number of rows");
    }
  }

  static FrameRows FromTensor(const TensorF& t) {
    return FrameRows(t.cols(), std::vector<float>(t.values().begin(),
                                                  t.values().end()));
  }
  TensorF ToTensor() const {
    if (rows() == 0) throw ShapeError("no frames to convert");
    return TensorF({rows(), dim_}, data_);
  }

  int dim() const { return dim_; }
  int rows() const { return dim_ == 0 ? 0 : static_cast<int>(data_.size() / dim_); }
  bool empty() const { return data_.empty(); }

  const float* row(int r) const { return data_.data() + static_cast<size_t>(r) * dim_; }
  float* row(int r) { return data_.data() + static_cast<size_t>(r) * dim_; }
  std::span<const float> row_span(int r) const { return {row(r), static_cast<size_t>(dim_)}; }
  const float* data() const { return data_.data(); }
  float* data() { return data_.data(); }

  void AppendRow(const float* values) { data_.insert(data_.end(), values, values + dim_); }
  void Append(const FrameRows& other) {
    if (other.empty()) return;
    if (dim_ == 0) dim_ = other.dim_;
    if (other.dim_ != dim_) throw ShapeError("frame dims differ");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  }
  // Appends rows zero-filled and returns a pointer to the first new row.
  float* AddRows(int n) {
    data_.resize(data_.size() + static_cast<size_t>(n) * dim_, 0.f);
    return row(rows() - n);
  }
  void DropFront(int n) { data_.erase(data_.begin(), data_.begin() + static_cast<size_t>(n) * dim_); }
  void Clear() { data_.clear(); }

 private:
  int dim_ = 0;
  std::vector<float> data_;
};

}  // namespace sasr

#endif  // SASR_DIFFKERN_FRAME_ROWS_H_

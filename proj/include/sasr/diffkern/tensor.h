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

#ifndef SASR_DIFFKERN_TENSOR_H_
#define SASR_DIFFKERN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sasr {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string ShapeToString(const std::vector<int>& shape);

// Dense row-major tensor. Rank 1 and 2 cover everything the kernels use;
// a scalar is shape {1}.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0))
      : shape_(std::move(shape)) {
    CheckShape();
    values_.assign(Count(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    CheckShape();
    if (values_.size() != Count(shape_)) {
      throw ShapeError("tensor of shape " + ShapeToString(shape_) + " given " +
                       std::to_string(values_.size()) + " values");
    }
  }

  static Tensor Scalar(T v) { return Tensor({1}, std::vector<T>{v}); }
  static Tensor Matrix(int rows, int cols, T fill = T(0)) {
    return Tensor({rows, cols}, fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i); }
  size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Leading extent for matrices, 1 for vectors.
  int rows() const { return rank() >= 2 ? shape_[0] : 1; }
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }

  T& operator[](size_t i) { return values_[i]; }
  const T& operator[](size_t i) const { return values_[i]; }
  T& at(int r, int c) { return values_[static_cast<size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const {
    return values_[static_cast<size_t>(r) * cols() + c];
  }
  T* row(int r) { return values_.data() + static_cast<size_t>(r) * cols(); }
  const T* row(int r) const {
    return values_.data() + static_cast<size_t>(r) * cols();
  }

  template <typename U>
  Tensor<U> Cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  void Reshape(std::vector<int> shape) {
    if (Count(shape) != values_.size()) {
      throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " +
                       ShapeToString(shape));
    }
    shape_ = std::move(shape);
  }

  void Fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && values_ == o.values_;
  }

  static size_t Count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), size_t{1},
                           std::multiplies<size_t>());
  }

 private:
  void CheckShape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must be non-empty");
    for (int d : shape_) {
      if (d <= 0) {
        throw ShapeError("tensor dims must be positive, got " +
                         ShapeToString(shape_));
      }
    }
  }

  std::vector<int> shape_;
  std::vector<T> values_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

template <typename U, typename T>
TensorMap<U> CastAll(const TensorMap<T>& in) {
  TensorMap<U> out;
  for (const auto& [k, v] : in) out.emplace(k, v.template Cast<U>());
  return out;
}

}  // namespace sasr

#endif  // SASR_DIFFKERN_TENSOR_H_

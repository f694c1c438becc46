// Copyright 2026 The tractdiff Authors. All Rights Reserved.
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

#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tractdiff/error.h"

namespace tractdiff {

using Shape = std::vector<int64_t>;

inline int64_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), int64_t{1},
                         std::multiplies<int64_t>());
}

std::string ShapeToString(const Shape& shape);

// Dense row-major tensor with value semantics.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != NumElements(shape_)) {
      Fail(ErrorKind::kShapeMismatch,
           "payload of " + std::to_string(data_.size()) +
               " values does not fit shape " + ShapeToString(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(i < 0 ? shape_.size() + i : i); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  template <typename... Idx>
  T& at(Idx... idx) {
    return data_[Offset({static_cast<int64_t>(idx)...})];
  }
  template <typename... Idx>
  const T& at(Idx... idx) const {
    return data_[Offset({static_cast<int64_t>(idx)...})];
  }

  void Fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor Reshaped(Shape shape) const {
    if (NumElements(shape) != size()) {
      Fail(ErrorKind::kShapeMismatch, "cannot reshape " + ShapeToString(shape_) +
                                          " to " + ShapeToString(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  // Contiguous slab `index` along the leading axis.
  Tensor Slice0(int64_t index) const {
    Shape sub(shape_.begin() + 1, shape_.end());
    const int64_t n = NumElements(sub);
    return Tensor(sub, std::vector<T>(data_.begin() + index * n,
                                      data_.begin() + (index + 1) * n));
  }
  std::span<T> Slab0(int64_t index) {
    const int64_t n = size() / shape_[0];
    return std::span<T>(data_).subspan(index * n, n);
  }
  std::span<const T> Slab0(int64_t index) const {
    const int64_t n = size() / shape_[0];
    return std::span<const T>(data_).subspan(index * n, n);
  }

  template <typename U>
  Tensor<U> Cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  int64_t Offset(std::initializer_list<int64_t> idx) const {
    int64_t offset = 0;
    int axis = 0;
    for (int64_t i : idx) offset = offset * shape_[axis++] + i;
    return offset;
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

inline void RequireSameShape(const Shape& a, const Shape& b,
                             const std::string& what) {
  if (a != b) {
    Fail(ErrorKind::kShapeMismatch,
         what + ": " + ShapeToString(a) + " vs " + ShapeToString(b));
  }
}

}  // namespace tractdiff

// Copyright 2026 The CoPriv-Sim Authors.
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

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "copriv/errors.hpp"
#include "copriv/ring.hpp"

namespace copriv {

/// NCHW extents. Filters reuse the same struct as (K, C, r, r).
struct Shape4 {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  constexpr size_t size() const noexcept {
    return static_cast<size_t>(n) * static_cast<size_t>(c) * static_cast<size_t>(h) *
           static_cast<size_t>(w);
  }

  constexpr size_t index(int in, int ic, int ih, int iw) const noexcept {
    return ((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw;
  }

  bool valid() const noexcept { return n > 0 && c > 0 && h > 0 && w > 0; }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Shape4& s) { return os << s.str(); }

/// Dense NCHW tensor over an arbitrary scalar type.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {
    if (!shape.valid()) throw InputError("tensor shape must be positive, got " + shape.str());
  }
  Tensor(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw InputError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape4& shape() const noexcept { return shape_; }
  size_t size() const noexcept { return data_.size(); }

  T& at(int n, int c, int h, int w) { return data_[shape_.index(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[shape_.index(n, c, h, w)]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& vec() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  template <class U, class F>
  Tensor<U> map(F&& f) const {
    std::vector<U> out;
    out.reserve(data_.size());
    for (const T& v : data_) out.push_back(f(v));
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

/// Ring-valued tensor with its fixed-point convention attached.
struct FixedTensor {
  Shape4 shape{};
  std::vector<uint64_t> data;
  RingConfig cfg{};

  FixedTensor() = default;
  FixedTensor(Shape4 s, const RingConfig& c) : shape(s), data(s.size(), 0), cfg(c) {}
  FixedTensor(Shape4 s, std::vector<uint64_t> d, const RingConfig& c)
      : shape(s), data(std::move(d)), cfg(c) {
    if (data.size() != shape.size()) {
      throw InputError("fixed tensor data length does not match shape " + shape.str());
    }
    for (auto& v : data) v &= cfg.mask();
  }

  size_t size() const noexcept { return data.size(); }
  RingElem elem(size_t i) const { return {data[i]}; }

  static FixedTensor encode(const Tensor<double>& x, const RingConfig& cfg) {
    FixedTensor out(x.shape(), cfg);
    for (size_t i = 0; i < x.size(); ++i) out.data[i] = copriv::encode(x[i], cfg).value;
    return out;
  }

  Tensor<double> decode() const {
    Tensor<double> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out[i] = copriv::decode(RingElem{data[i]}, cfg);
    return out;
  }

  friend bool operator==(const FixedTensor&, const FixedTensor&) = default;
};

/// Elementwise snap of a real tensor onto the fixed-point grid.
inline Tensor<double> quantize(const Tensor<double>& x, const RingConfig& cfg) {
  return x.map<double>([&](double v) { return quantize(v, cfg); });
}

}  // namespace copriv

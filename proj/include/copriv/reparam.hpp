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

// Structural re-parameterization: a ReLU-free inverted residual block
// (pw1 -> dw r x r -> pw2, plus identity) collapses into one dense r x r
// conv. Works on real weights; encoding happens afterwards.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "copriv/errors.hpp"
#include "copriv/netspec.hpp"
#include "copriv/tensor.hpp"
#include "copriv/winograd.hpp"

namespace copriv {

struct InvertedResidualBlock {
  int c_in = 0;
  int hidden = 0;
  int c_out = 0;
  int stride = 1;
  bool relu_alpha = false;
  std::optional<ConvWeights> pw1;  // (hidden, c_in, 1, 1); absent when expand = 1
  ConvWeights dw;                  // (hidden, 1, r, r)
  ConvWeights pw2;                 // (c_out, hidden, 1, 1)

  int r() const { return dw.w.shape().h; }
  bool has_residual() const { return stride == 1 && c_in == c_out; }
};

struct MergedConv {
  ConvWeights weights;  // (c_out, c_in, r, r)
  int stride = 1;
  int pad = 1;

  ConvParams params() const { return {stride, pad, 1}; }
};

namespace detail {

inline Tensor<double> add_bias(Tensor<double> y, const std::vector<double>& b) {
  const Shape4 s = y.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) y.at(n, c, i, j) += b[static_cast<size_t>(c)];
  return y;
}

inline Tensor<double> relu(Tensor<double> y) {
  for (auto& v : y.vec()) v = std::max(v, 0.0);
  return y;
}

inline void check_block(const InvertedResidualBlock& b) {
  const Shape4 dw = b.dw.w.shape();
  if (dw.h != dw.w || dw.h % 2 == 0) throw InputError("depthwise kernel must be square with odd size, got " + dw.str());
  if (dw.n != b.hidden || dw.c != 1) throw InputError("depthwise filter " + dw.str() + " does not match hidden width");
  if (b.pw2.w.shape() != Shape4{b.c_out, b.hidden, 1, 1}) throw InputError("pw2 filter has the wrong shape");
  if (b.pw1) {
    if (b.pw1->w.shape() != Shape4{b.hidden, b.c_in, 1, 1}) throw InputError("pw1 filter has the wrong shape");
  } else if (b.hidden != b.c_in) {
    throw InputError("a block without pw1 needs hidden = c_in");
  }
}

}  // namespace detail

/// Plaintext block evaluation; the oracle for merging. ReLUs follow pw1
/// and dw when relu_alpha is set.
inline Tensor<double> block_forward(const InvertedResidualBlock& b, const Tensor<double>& x) {
  detail::check_block(b);
  Tensor<double> y = x;
  if (b.pw1) {
    y = detail::add_bias(direct_conv(y, b.pw1->w), b.pw1->b);
    if (b.relu_alpha) y = detail::relu(std::move(y));
  }
  const int r = b.r();
  y = detail::add_bias(direct_conv(y, b.dw.w, ConvParams{b.stride, (r - 1) / 2, b.hidden}), b.dw.b);
  if (b.relu_alpha) y = detail::relu(std::move(y));
  y = detail::add_bias(direct_conv(y, b.pw2.w), b.pw2.b);
  if (b.has_residual())
    for (size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  return y;
}

/// Merge a linear block into one dense conv. The identity stack (one
/// centred delta per input channel, padded to r x r) is pushed through the
/// three convs; the response of input channel c at output channel o is the
/// spatially flipped kernel W_r[o][c]. The identity residual adds a centre
/// delta. Biases: dw and pw2 biases fold exactly; a pw1 bias would leak into
/// the zero padding of dw and is rejected.
inline MergedConv merge_block(const InvertedResidualBlock& b) {
  if (b.relu_alpha) throw InputError("block still has its ReLUs (alpha = 1) and is not linear");
  detail::check_block(b);
  if (b.pw1)
    for (double v : b.pw1->b)
      if (v != 0.0) throw InputError("pw1 bias must be zero for an exact merge");
  const int r = b.r();
  const int half = (r - 1) / 2;

  Tensor<double> stack({b.c_in, b.c_in, r, r}, 0.0);
  for (int c = 0; c < b.c_in; ++c) stack.at(c, c, half, half) = 1.0;
  if (b.pw1) stack = direct_conv(stack, b.pw1->w);
  stack = direct_conv(stack, b.dw.w, ConvParams{1, half, b.hidden});
  stack = direct_conv(stack, b.pw2.w);  // (c_in, c_out, r, r)

  MergedConv out;
  out.stride = b.stride;
  out.pad = half;
  out.weights.w = Tensor<double>({b.c_out, b.c_in, r, r}, 0.0);
  for (int o = 0; o < b.c_out; ++o)
    for (int c = 0; c < b.c_in; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) out.weights.w.at(o, c, i, j) = stack.at(c, o, r - 1 - i, r - 1 - j);
  if (b.has_residual())
    for (int o = 0; o < b.c_out; ++o) out.weights.w.at(o, o, half, half) += 1.0;

  // Constant channel offsets: pw2 (dw bias) + pw2 bias.
  out.weights.b = b.pw2.b;
  for (int o = 0; o < b.c_out; ++o)
    for (int h = 0; h < b.hidden; ++h) out.weights.b[static_cast<size_t>(o)] += b.pw2.w.at(o, h, 0, 0) * b.dw.b[static_cast<size_t>(h)];
  return out;
}

/// Forward pass of a merged conv, bias included.
inline Tensor<double> merged_forward(const MergedConv& m, const Tensor<double>& x) {
  return detail::add_bias(direct_conv(x, m.weights.w, m.params()), m.weights.b);
}

/// Batch-norm statistics for one conv's output channels.
struct BatchNorm {
  std::vector<double> gamma, beta, mean, var;
  double eps = 0.0;
};

/// Fold y = gamma (conv(x) + b - mean) / sqrt(var + eps) + beta into the
/// conv. Errors on a channel whose variance is not positive.
inline ConvWeights merge_bn(const ConvWeights& conv, const BatchNorm& bn) {
  const Shape4 s = conv.w.shape();
  const size_t k = static_cast<size_t>(s.n);
  if (bn.gamma.size() != k || bn.beta.size() != k || bn.mean.size() != k || bn.var.size() != k)
    throw InputError("batch norm has " + std::to_string(bn.gamma.size()) + " channels, conv has " + std::to_string(k));
  ConvWeights out = conv;
  if (out.b.empty()) out.b.assign(k, 0.0);
  for (size_t o = 0; o < k; ++o) {
    if (!(bn.var[o] > 0) || !std::isfinite(bn.var[o]) || !std::isfinite(bn.gamma[o]) || !std::isfinite(bn.mean[o]) ||
        !std::isfinite(bn.beta[o]))
      throw InputError("batch norm channel " + std::to_string(o) + " has non-positive or non-finite statistics");
    const double f = bn.gamma[o] / std::sqrt(bn.var[o] + bn.eps);
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) out.w.at(static_cast<int>(o), c, i, j) *= f;
    out.b[o] = bn.beta[o] + (out.b[o] - bn.mean[o]) * f;
  }
  return out;
}

// --------------------------------------------------- netspec bridging

inline InvertedResidualBlock block_from_layer(const LayerSpec& l, const LayerWeights& w) {
  if (l.kind != LayerKind::InvertedResidual) throw InputError("layer '" + l.name + "' is not an inverted residual block");
  InvertedResidualBlock b;
  b.c_in = l.c_in;
  b.hidden = l.hidden;
  b.c_out = l.c_out;
  b.stride = l.stride;
  b.relu_alpha = l.alpha;
  size_t at = 0;
  if (l.has_pw1()) b.pw1 = w.convs.at(at++);
  b.dw = w.convs.at(at++);
  b.pw2 = w.convs.at(at++);
  return b;
}

/// Dense conv layer that replaces a merged block. It keeps the block's
/// name and Winograd policy and records where it came from.
inline LayerSpec merged_layer(const LayerSpec& l) {
  LayerSpec m;
  m.name = l.name;
  m.block = l.block;
  m.kind = LayerKind::Conv;
  m.c_in = l.c_in;
  m.c_out = l.c_out;
  m.h_in = l.h_in;
  m.w_in = l.w_in;
  m.h = l.h;
  m.w = l.w;
  m.r = l.r;
  m.stride = l.stride;
  m.padding = (l.r - 1) / 2;
  m.alpha = false;
  m.policy = l.policy;
  m.bn = false;
  m.merged_from = l.name;
  return m;
}

}  // namespace copriv

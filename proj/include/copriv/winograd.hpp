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

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/rational.hpp>

#include "copriv/errors.hpp"
#include "copriv/ring.hpp"
#include "copriv/tensor.hpp"

namespace copriv {

using Rational = boost::rational<int64_t>;

/// Small dense matrix of exact fractions.
struct RationalMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<Rational> v;

  RationalMatrix() = default;
  RationalMatrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c) {}
  RationalMatrix(std::initializer_list<std::initializer_list<Rational>> init) {
    rows = static_cast<int>(init.size());
    cols = rows ? static_cast<int>(init.begin()->size()) : 0;
    for (const auto& row : init) {
      if (static_cast<int>(row.size()) != cols) throw InputError("ragged matrix literal");
      v.insert(v.end(), row.begin(), row.end());
    }
  }

  Rational& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  const Rational& at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

  bool is_integer() const {
    return std::all_of(v.begin(), v.end(), [](const Rational& x) { return x.denominator() == 1; });
  }

  RationalMatrix transpose() const {
    RationalMatrix t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
    return t;
  }

  friend bool operator==(const RationalMatrix&, const RationalMatrix&) = default;
};

/// Convert an exact coefficient into the scalar domain a transform runs in.
/// Ring scalars (uint64_t) only accept integers; wrap-around of negative
/// values is the intended two's-complement embedding.
template <class T>
T from_rational(const Rational& x) {
  if constexpr (std::is_same_v<T, Rational>) {
    return x;
  } else if constexpr (std::is_same_v<T, uint64_t>) {
    if (x.denominator() != 1) throw InputError("fractional coefficient cannot act on ring values");
    return static_cast<uint64_t>(x.numerator());
  } else {
    return static_cast<T>(x.numerator()) / static_cast<T>(x.denominator());
  }
}

/// One supported Winograd algorithm F(m x m, r x r) at a given stride.
///
/// `at` holds A^T (m x n), `bt` holds B^T (n x n) and `g` holds G (n x r), so
/// that a tile evaluates as Y = A^T [(G W G^T) . (B^T X B)] A.
struct WinogradVariant {
  int m = 2;
  int r = 3;
  int stride = 1;
  RationalMatrix at;
  RationalMatrix bt;
  RationalMatrix g;

  int n() const noexcept { return bt.rows; }
  /// Input-space distance between neighbouring tiles.
  int step() const noexcept { return m * stride; }

  std::string name() const {
    std::string s = "F(" + std::to_string(m) + "x" + std::to_string(m) + "," + std::to_string(r) +
                    "x" + std::to_string(r) + ")";
    if (stride != 1) s += "/s" + std::to_string(stride);
    return s;
  }

  static WinogradVariant f2x2_3x3() {
    const Rational h(1, 2);
    WinogradVariant v;
    v.m = 2;
    v.r = 3;
    v.stride = 1;
    v.bt = {{1, 0, -1, 0}, {0, 1, 1, 0}, {0, -1, 1, 0}, {0, 1, 0, -1}};
    v.g = {{1, 0, 0}, {h, h, h}, {h, -h, h}, {0, 0, 1}};
    v.at = {{1, 1, 1, 0}, {0, 1, -1, -1}};
    return v;
  }

  static WinogradVariant f4x4_3x3() {
    WinogradVariant v;
    v.m = 4;
    v.r = 3;
    v.stride = 1;
    v.bt = {{4, 0, -5, 0, 1, 0},  {0, -4, -4, 1, 1, 0}, {0, 4, -4, -1, 1, 0},
            {0, -2, -1, 2, 1, 0}, {0, 2, -1, -2, 1, 0}, {0, 4, 0, -5, 0, 1}};
    v.g = {{Rational(1, 4), 0, 0},
           {Rational(-1, 6), Rational(-1, 6), Rational(-1, 6)},
           {Rational(-1, 6), Rational(1, 6), Rational(-1, 6)},
           {Rational(1, 24), Rational(1, 12), Rational(1, 6)},
           {Rational(1, 24), Rational(-1, 12), Rational(1, 6)},
           {0, 0, 1}};
    v.at = {{1, 1, 1, 1, 1, 0}, {0, 1, -1, 2, -2, 0}, {0, 1, 1, 4, 4, 0}, {0, 1, -1, 8, -8, 1}};
    return v;
  }

  /// Stride-2 F(2x2,3x3): even taps go through F(2,2), odd taps are direct.
  static WinogradVariant f2x2_3x3_stride2() {
    WinogradVariant v;
    v.m = 2;
    v.r = 3;
    v.stride = 2;
    v.bt = {{1, 0, -1, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, -1, 0, 1}};
    v.g = {{1, 0, 0}, {0, 1, 0}, {1, 0, 1}, {0, 1, 0}, {0, 0, 1}};
    v.at = {{1, 1, 1, 0, 0}, {0, 0, 1, 1, 1}};
    return v;
  }

  static WinogradVariant select(int m, int r, int stride) {
    if (r == 3 && stride == 1 && m == 2) return f2x2_3x3();
    if (r == 3 && stride == 1 && m == 4) return f4x4_3x3();
    if (r == 3 && stride == 2 && m == 2) return f2x2_3x3_stride2();
    throw UnsupportedVariant("no Winograd variant for m=" + std::to_string(m) +
                             ", r=" + std::to_string(r) + ", stride=" + std::to_string(stride));
  }
};

/// Convolution hyper-parameters shared by every conv routine.
struct ConvParams {
  int stride = 1;
  int pad = 0;
  int groups = 1;
};

inline int conv_out_size(int in, int r, int stride, int pad) { return (in + 2 * pad - r) / stride + 1; }

/// How an input plane is cut into overlapping n x n tiles.
struct TileGeometry {
  int m = 2;
  int r = 3;
  int stride = 1;
  int n = 4;
  int step = 2;
  int in_h = 0;
  int in_w = 0;
  int out_h = 0;
  int out_w = 0;
  int tiles_h = 0;
  int tiles_w = 0;
  int padded_h = 0;
  int padded_w = 0;
  int pad_bottom = 0;
  int pad_right = 0;

  int tiles() const noexcept { return tiles_h * tiles_w; }

  /// Geometry for an input plane that already carries its conv-level padding.
  static TileGeometry make(int in_h, int in_w, const WinogradVariant& v) {
    if (in_h < v.r || in_w < v.r) {
      throw InputError("input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                       " is smaller than the filter");
    }
    TileGeometry g;
    g.m = v.m;
    g.r = v.r;
    g.stride = v.stride;
    g.n = v.n();
    g.step = v.step();
    g.in_h = in_h;
    g.in_w = in_w;
    g.out_h = conv_out_size(in_h, v.r, v.stride, 0);
    g.out_w = conv_out_size(in_w, v.r, v.stride, 0);
    g.tiles_h = (g.out_h + v.m - 1) / v.m;
    g.tiles_w = (g.out_w + v.m - 1) / v.m;
    g.padded_h = std::max(in_h, (g.tiles_h - 1) * g.step + g.n);
    g.padded_w = std::max(in_w, (g.tiles_w - 1) * g.step + g.n);
    g.pad_bottom = g.padded_h - in_h;
    g.pad_right = g.padded_w - in_w;
    return g;
  }
};

/// Tiles laid out as [batch][channel][tile_row][tile_col][n][n].
template <class T>
struct TileSet {
  TileGeometry geom;
  int batch = 0;
  int channels = 0;
  int tile_size = 0;
  std::vector<T> data;

  size_t tile_offset(int b, int c, int t) const {
    return ((static_cast<size_t>(b) * channels + c) * geom.tiles() + t) *
           static_cast<size_t>(tile_size) * tile_size;
  }
  size_t tile_count() const { return static_cast<size_t>(batch) * channels * geom.tiles(); }
};

/// Zero-pad every side of the spatial plane.
template <class T>
Tensor<T> pad_input(const Tensor<T>& x, int pad) {
  if (pad == 0) return x;
  const Shape4 s = x.shape();
  Tensor<T> out({s.n, s.c, s.h + 2 * pad, s.w + 2 * pad}, T{});
  for (int b = 0; b < s.n; ++b)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) out.at(b, c, i + pad, j + pad) = x.at(b, c, i, j);
  return out;
}

/// Cut the (conv-padded) input into n x n tiles; positions beyond the input
/// on the right/bottom edge read as zero.
template <class T>
TileSet<T> tile_and_pad(const Tensor<T>& x, const TileGeometry& g) {
  const Shape4 s = x.shape();
  if (s.h != g.in_h || s.w != g.in_w) throw InputError("tile geometry does not match input " + s.str());
  TileSet<T> ts;
  ts.geom = g;
  ts.batch = s.n;
  ts.channels = s.c;
  ts.tile_size = g.n;
  ts.data.assign(ts.tile_count() * g.n * g.n, T{});
  for (int b = 0; b < s.n; ++b)
    for (int c = 0; c < s.c; ++c)
      for (int th = 0; th < g.tiles_h; ++th)
        for (int tw = 0; tw < g.tiles_w; ++tw) {
          T* tile = ts.data.data() + ts.tile_offset(b, c, th * g.tiles_w + tw);
          for (int i = 0; i < g.n; ++i) {
            const int y = th * g.step + i;
            if (y >= s.h) break;
            for (int j = 0; j < g.n; ++j) {
              const int xx = tw * g.step + j;
              if (xx >= s.w) break;
              tile[i * g.n + j] = x.at(b, c, y, xx);
            }
          }
        }
  return ts;
}

/// Reassemble the input plane from its overlapping tiles (inverse of
/// tile_and_pad over the unpadded region).
template <class T>
Tensor<T> untile_input(const TileSet<T>& ts) {
  const TileGeometry& g = ts.geom;
  Tensor<T> out({ts.batch, ts.channels, g.in_h, g.in_w}, T{});
  for (int b = 0; b < ts.batch; ++b)
    for (int c = 0; c < ts.channels; ++c)
      for (int th = 0; th < g.tiles_h; ++th)
        for (int tw = 0; tw < g.tiles_w; ++tw) {
          const T* tile = ts.data.data() + ts.tile_offset(b, c, th * g.tiles_w + tw);
          for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
              const int y = th * g.step + i;
              const int xx = tw * g.step + j;
              if (y < g.in_h && xx < g.in_w) out.at(b, c, y, xx) = tile[i * g.n + j];
            }
        }
  return out;
}

/// Concatenate m x m output tiles ([b][k][tile][m][m]) and crop the padding.
template <class T>
Tensor<T> untile_output(const std::vector<T>& tiles, int batch, int k_out, const TileGeometry& g) {
  Tensor<T> out({batch, k_out, g.out_h, g.out_w}, T{});
  const size_t mm = static_cast<size_t>(g.m) * g.m;
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < k_out; ++k)
      for (int th = 0; th < g.tiles_h; ++th)
        for (int tw = 0; tw < g.tiles_w; ++tw) {
          const size_t base = ((static_cast<size_t>(b) * k_out + k) * g.tiles() + th * g.tiles_w + tw) * mm;
          for (int i = 0; i < g.m; ++i)
            for (int j = 0; j < g.m; ++j) {
              const int y = th * g.m + i;
              const int xx = tw * g.m + j;
              if (y < g.out_h && xx < g.out_w) out.at(b, k, y, xx) = tiles[base + i * g.m + j];
            }
        }
  return out;
}

namespace detail {

inline void check_conv_dims(const Shape4& in, const Shape4& f, const ConvParams& p) {
  if (p.groups <= 0 || in.c % p.groups != 0 || f.n % p.groups != 0) {
    throw InputError("channel counts are not divisible by groups=" + std::to_string(p.groups));
  }
  if (f.c != in.c / p.groups) {
    throw InputError("filter " + f.str() + " does not match input " + in.str() + " with groups=" +
                     std::to_string(p.groups));
  }
  if (p.stride <= 0 || p.pad < 0) throw InputError("stride must be positive and pad non-negative");
  if (in.h + 2 * p.pad < f.h || in.w + 2 * p.pad < f.w) {
    throw InputError("filter " + f.str() + " is larger than padded input " + in.str());
  }
}

// Dense row-major multiply helper: out (rows x cols) = lhs (rows x inner) * rhs (inner x cols).
template <class T>
std::vector<T> matmul(const std::vector<T>& lhs, const std::vector<T>& rhs, int rows, int inner, int cols) {
  std::vector<T> out(static_cast<size_t>(rows) * cols, T{});
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < inner; ++k) {
      const T a = lhs[static_cast<size_t>(i) * inner + k];
      if (a == T{}) continue;
      for (int j = 0; j < cols; ++j) out[static_cast<size_t>(i) * cols + j] += a * rhs[static_cast<size_t>(k) * cols + j];
    }
  return out;
}

template <class T>
std::vector<T> convert(const RationalMatrix& m) {
  std::vector<T> out;
  out.reserve(m.v.size());
  for (const auto& x : m.v) out.push_back(from_rational<T>(x));
  return out;
}

}  // namespace detail

/// Cross-correlation via im2col + GEMM. Filter is (K, C/groups, rh, rw).
template <class T>
Tensor<T> direct_conv(const Tensor<T>& input, const Tensor<T>& filter, const ConvParams& p = {}) {
  const Shape4 in = input.shape();
  const Shape4 f = filter.shape();
  detail::check_conv_dims(in, f, p);
  const int rh = f.h;
  const int rw = f.w;
  const int ho = conv_out_size(in.h, rh, p.stride, p.pad);
  const int wo = conv_out_size(in.w, rw, p.stride, p.pad);
  const int cpg = in.c / p.groups;
  const int kpg = f.n / p.groups;
  const int rows = cpg * rh * rw;
  const int cols = ho * wo;
  Tensor<T> out({in.n, f.n, ho, wo}, T{});
  std::vector<T> col(static_cast<size_t>(rows) * cols);
  for (int b = 0; b < in.n; ++b)
    for (int grp = 0; grp < p.groups; ++grp) {
      for (int cc = 0; cc < cpg; ++cc)
        for (int i = 0; i < rh; ++i)
          for (int j = 0; j < rw; ++j) {
            const size_t row = (static_cast<size_t>(cc) * rh + i) * rw + j;
            for (int oy = 0; oy < ho; ++oy)
              for (int ox = 0; ox < wo; ++ox) {
                const int y = oy * p.stride + i - p.pad;
                const int x = ox * p.stride + j - p.pad;
                const bool inside = y >= 0 && y < in.h && x >= 0 && x < in.w;
                col[row * cols + oy * wo + ox] = inside ? input.at(b, grp * cpg + cc, y, x) : T{};
              }
          }
      std::vector<T> wmat(filter.vec().begin() + static_cast<std::ptrdiff_t>(grp) * kpg * rows,
                          filter.vec().begin() + static_cast<std::ptrdiff_t>(grp + 1) * kpg * rows);
      const auto prod = detail::matmul(wmat, col, kpg, rows, cols);
      for (int k = 0; k < kpg; ++k)
        for (int q = 0; q < cols; ++q) out.at(b, grp * kpg + k, q / wo, q % wo) = prod[static_cast<size_t>(k) * cols + q];
    }
  return out;
}

/// Per-tile transforms of one variant, materialized in scalar domain T.
template <class T>
struct TileTransforms {
  int m = 0;
  int n = 0;
  int r = 0;
  std::vector<T> at, a, bt, b, g, gt;

  explicit TileTransforms(const WinogradVariant& v, bool with_filter = true)
      : m(v.m), n(v.n()), r(v.r) {
    at = detail::convert<T>(v.at);
    a = detail::convert<T>(v.at.transpose());
    bt = detail::convert<T>(v.bt);
    b = detail::convert<T>(v.bt.transpose());
    if (with_filter) {
      g = detail::convert<T>(v.g);
      gt = detail::convert<T>(v.g.transpose());
    }
  }

  /// G W G^T for an r x r filter slice.
  std::vector<T> filter(const T* w) const {
    std::vector<T> wv(w, w + static_cast<size_t>(r) * r);
    return detail::matmul(detail::matmul(g, wv, n, r, r), gt, n, r, n);
  }
  /// B^T X B for an n x n input tile.
  std::vector<T> input(const T* x) const {
    std::vector<T> xv(x, x + static_cast<size_t>(n) * n);
    return detail::matmul(detail::matmul(bt, xv, n, n, n), b, n, n, n);
  }
  /// A^T M A for an n x n Winograd-domain tile.
  std::vector<T> output(const std::vector<T>& mtile) const {
    return detail::matmul(detail::matmul(at, mtile, m, n, n), a, m, n, m);
  }
};

/// Filter transform of a whole (K, C/groups, r, r) filter bank into
/// (K, C/groups, n, n).
template <class T>
Tensor<T> transform_filter_bank(const Tensor<T>& filter, const WinogradVariant& v) {
  const Shape4 f = filter.shape();
  if (f.h != v.r || f.w != v.r) throw UnsupportedVariant("filter size does not match " + v.name());
  TileTransforms<T> tt(v);
  const int n = v.n();
  Tensor<T> out({f.n, f.c, n, n}, T{});
  for (int k = 0; k < f.n; ++k)
    for (int c = 0; c < f.c; ++c) {
      const auto u = tt.filter(&filter.vec()[f.index(k, c, 0, 0)]);
      std::copy(u.begin(), u.end(), out.vec().begin() + static_cast<std::ptrdiff_t>(out.shape().index(k, c, 0, 0)));
    }
  return out;
}

/// Winograd convolution given an already transformed filter bank. Only the
/// input/output transforms run here, so T may be a ring scalar as long as
/// the variant's A and B are integral.
template <class T>
Tensor<T> winograd_conv_pretransformed(const Tensor<T>& input, const Tensor<T>& u_bank, const WinogradVariant& v,
                                       const ConvParams& p = {}) {
  if (p.stride != v.stride) {
    throw UnsupportedVariant(v.name() + " cannot run a stride-" + std::to_string(p.stride) + " conv");
  }
  const Shape4 in = input.shape();
  const Shape4 u = u_bank.shape();
  const int n = v.n();
  if (u.h != n || u.w != n) throw InputError("transformed filter bank has the wrong tile size");
  detail::check_conv_dims(in, {u.n, u.c, v.r, v.r}, p);
  const Tensor<T> padded = pad_input(input, p.pad);
  const TileGeometry geom = TileGeometry::make(padded.shape().h, padded.shape().w, v);
  const TileSet<T> tiles = tile_and_pad(padded, geom);
  TileTransforms<T> tt(v, /*with_filter=*/false);

  const int cpg = in.c / p.groups;
  const int kpg = u.n / p.groups;
  const size_t nn = static_cast<size_t>(n) * n;
  const size_t mm = static_cast<size_t>(v.m) * v.m;
  std::vector<T> vt(tiles.tile_count() * nn);
  for (size_t t = 0; t < tiles.tile_count(); ++t) {
    const auto tr = tt.input(tiles.data.data() + t * nn);
    std::copy(tr.begin(), tr.end(), vt.begin() + static_cast<std::ptrdiff_t>(t * nn));
  }
  std::vector<T> out_tiles(static_cast<size_t>(in.n) * u.n * geom.tiles() * mm, T{});
  std::vector<T> acc(nn);
  for (int b = 0; b < in.n; ++b)
    for (int k = 0; k < u.n; ++k) {
      const int grp = k / kpg;
      for (int t = 0; t < geom.tiles(); ++t) {
        std::fill(acc.begin(), acc.end(), T{});
        for (int cc = 0; cc < cpg; ++cc) {
          const T* uk = &u_bank.vec()[u.index(k, cc, 0, 0)];
          const T* vc = &vt[tiles.tile_offset(b, grp * cpg + cc, t)];
          for (size_t e = 0; e < nn; ++e) acc[e] += uk[e] * vc[e];
        }
        const auto y = tt.output(acc);
        std::copy(y.begin(), y.end(),
                  out_tiles.begin() + static_cast<std::ptrdiff_t>(((static_cast<size_t>(b) * u.n + k) * geom.tiles() + t) * mm));
      }
    }
  return untile_output(out_tiles, in.n, u.n, geom);
}

/// Winograd convolution in a field-like scalar domain (double, Rational).
template <class T>
Tensor<T> winograd_conv(const Tensor<T>& input, const Tensor<T>& filter, const WinogradVariant& v,
                        const ConvParams& p = {}) {
  return winograd_conv_pretransformed(input, transform_filter_bank(filter, v), v, p);
}

/// Extra fractional bits given to transformed filters beyond the ring scale.
/// F(2x2,3x3) has halves in G, so two extra bits keep G W G^T exact for any
/// grid-aligned W; the stride-2 G is integral. F(4x4,3x3) carries factors of
/// 1/3 that no power-of-two scale represents, so its bits only shrink the
/// rounding error. Ten bits hold that error under 2^(2-scale) for unit-range
/// operands; at l = 41, scale = 12 they leave |y| < 64 of output headroom.
inline int default_filter_extra_bits(const WinogradVariant& v) {
  if (v.m == 2 && v.stride == 1) return 2;
  if (v.m == 2 && v.stride == 2) return 0;
  return 10;
}

/// Real-valued filter bank -> transformed bank encoded at scale + extra_bits.
inline Tensor<uint64_t> encode_transformed_filters(const Tensor<double>& filter, const WinogradVariant& v,
                                                  const RingConfig& cfg, int extra_bits) {
  const Tensor<double> u = transform_filter_bank(filter, v);
  return u.map<uint64_t>([&](double x) { return encode_at(x, cfg, cfg.scale + extra_bits).value; });
}

/// Plaintext fixed-point Winograd conv: ring input at `scale`, real filter
/// transformed then encoded, integer input/output transforms in the ring,
/// one floor-truncation by scale + extra_bits at the end.
inline FixedTensor winograd_conv_fixed(const FixedTensor& input, const Tensor<double>& filter,
                                       const WinogradVariant& v, const ConvParams& p, int extra_bits) {
  const RingConfig& cfg = input.cfg;
  const Tensor<uint64_t> u = encode_transformed_filters(filter, v, cfg, extra_bits);
  Tensor<uint64_t> x(input.shape, input.data);
  Tensor<uint64_t> y = winograd_conv_pretransformed(x, u, v, p);
  FixedTensor out(y.shape(), cfg);
  for (size_t i = 0; i < y.size(); ++i) out.data[i] = ring::arith_shift(y[i] & cfg.mask(), cfg.scale + extra_bits, cfg);
  return out;
}

/// Plaintext fixed-point direct conv: encode W, ring GEMM, floor-truncate.
inline FixedTensor direct_conv_fixed(const FixedTensor& input, const Tensor<double>& filter, const ConvParams& p) {
  const RingConfig& cfg = input.cfg;
  const Tensor<uint64_t> w = filter.map<uint64_t>([&](double x) { return encode(x, cfg).value; });
  Tensor<uint64_t> x(input.shape, input.data);
  Tensor<uint64_t> y = direct_conv(x, w, p);
  FixedTensor out(y.shape(), cfg);
  for (size_t i = 0; i < y.size(); ++i) out.data[i] = ring::arith_shift(y[i] & cfg.mask(), cfg.scale, cfg);
  return out;
}

// Multiplication counts.

constexpr int64_t regular_mults_1d(int m, int r) { return static_cast<int64_t>(m) * r; }
constexpr int64_t winograd_mults_1d(int m, int r) { return static_cast<int64_t>(m) + r - 1; }
constexpr int64_t regular_mults_per_tile(int m, int r) { return static_cast<int64_t>(m) * m * r * r; }
inline int64_t winograd_mults_per_tile(const WinogradVariant& v) { return static_cast<int64_t>(v.n()) * v.n(); }

/// Total products of a regular conv producing an out_h x out_w map.
inline int64_t regular_conv_mults(int c_in, int c_out, int r, int out_h, int out_w, int groups = 1) {
  return static_cast<int64_t>(c_in / groups) * c_out * r * r * out_h * out_w;
}

/// Total Winograd-domain products of a tiled conv.
inline int64_t winograd_conv_mults(int c_in, int c_out, const TileGeometry& g, int groups = 1) {
  return static_cast<int64_t>(c_in / groups) * c_out * g.tiles() * g.n * g.n;
}

}  // namespace copriv

// Copyright 2026 The CoPriv-Sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "copriv/winograd.hpp"

using namespace copriv;

namespace {

Tensor<Rational> rand_int_tensor(Shape4 s, std::mt19937_64& rng, int lo = -8, int hi = 8) {
  std::uniform_int_distribution<int> d(lo, hi);
  Tensor<Rational> t(s);
  for (auto& v : t.vec()) v = d(rng);
  return t;
}

Tensor<Rational> row(std::vector<int> v) {
  Tensor<Rational> t({1, 1, 1, static_cast<int>(v.size())});
  for (size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

std::vector<Rational> filter_1d(const WinogradVariant& v, const std::vector<Rational>& w) {
  std::vector<Rational> out(v.n());
  for (int i = 0; i < v.n(); ++i)
    for (int j = 0; j < v.r; ++j) out[i] += v.g.at(i, j) * w[j];
  return out;
}

std::vector<Rational> input_1d(const WinogradVariant& v, const std::vector<Rational>& x) {
  std::vector<Rational> out(v.n());
  for (int i = 0; i < v.n(); ++i)
    for (int j = 0; j < v.n(); ++j) out[i] += v.bt.at(i, j) * x[j];
  return out;
}

std::vector<Rational> winograd_1d(const WinogradVariant& v, const std::vector<Rational>& x, const std::vector<Rational>& w) {
  const auto gw = filter_1d(v, w);
  const auto bx = input_1d(v, x);
  std::vector<Rational> y(v.m);
  for (int i = 0; i < v.m; ++i)
    for (int j = 0; j < v.n(); ++j) y[i] += v.at.at(i, j) * gw[j] * bx[j];
  return y;
}

const std::vector<WinogradVariant>& all_variants() {
  static const std::vector<WinogradVariant> v{WinogradVariant::f2x2_3x3(), WinogradVariant::f4x4_3x3(),
                                              WinogradVariant::f2x2_3x3_stride2()};
  return v;
}

}  // namespace

TEST(DirectConv, OneDimensionalGoldens) {
  const Tensor<Rational> ones({1, 1, 1, 3}, Rational(1));
  EXPECT_EQ(direct_conv(row({1, 2, 3, 4}), ones).vec(), (std::vector<Rational>{6, 9}));
  EXPECT_EQ(direct_conv(row({1, 1, 1, 1, 1}), ones, {2, 0, 1}).vec(), (std::vector<Rational>{3, 3}));
  const auto z = direct_conv(Tensor<Rational>({1, 2, 6, 6}), Tensor<Rational>({3, 2, 3, 3}, Rational(5)));
  for (const auto& v : z.vec()) EXPECT_EQ(v, Rational(0));
}

TEST(DirectConv, DimensionErrors) {
  EXPECT_THROW(direct_conv(Tensor<double>({1, 3, 4, 4}), Tensor<double>({1, 2, 3, 3})), InputError);
  EXPECT_THROW(direct_conv(Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 1, 3, 3})), InputError);
  EXPECT_NO_THROW(direct_conv(Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 1, 3, 3}), {1, 1, 1}));
}

TEST(Winograd, F23ScalarFormulas) {
  const auto v = WinogradVariant::f2x2_3x3();
  const std::vector<Rational> x{1, 2, 3, 4}, w{1, 1, 1};
  const auto gw = filter_1d(v, w);
  const auto bx = input_1d(v, x);
  std::vector<Rational> m(4);
  for (int i = 0; i < 4; ++i) m[i] = gw[i] * bx[i];
  EXPECT_EQ(m, (std::vector<Rational>{-2, Rational(15, 2), Rational(1, 2), -2}));
  EXPECT_EQ(winograd_1d(v, x, w), (std::vector<Rational>{6, 9}));
}

TEST(Winograd, InterpolationIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(-20, 20);
  for (const auto& v : all_variants()) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Rational> x(v.n()), w(v.r);
      for (auto& e : x) e = d(rng);
      for (auto& e : w) e = d(rng);
      const auto y = winograd_1d(v, x, w);
      for (int i = 0; i < v.m; ++i) {
        Rational expect = 0;
        for (int j = 0; j < v.r; ++j) expect += x[i * v.stride + j] * w[j];
        ASSERT_EQ(y[i], expect) << v.name();
      }
    }
  }
}

TEST(Winograd, Stride2AlgebraMatchesEvenOddSplit) {
  const auto v = WinogradVariant::f2x2_3x3_stride2();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(-50, 50);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Rational> x(5), y(3);
    for (auto& e : x) e = d(rng);
    for (auto& e : y) e = d(rng);
    const auto out = winograd_1d(v, x, y);
    EXPECT_EQ(out[0], x[0] * y[0] + x[1] * y[1] + x[2] * y[2]);
    EXPECT_EQ(out[1], x[2] * y[0] + x[3] * y[1] + x[4] * y[2]);
  }
}

TEST(Winograd, MatrixShapes) {
  const auto f2 = WinogradVariant::f2x2_3x3();
  EXPECT_EQ(f2.bt.rows, 4);
  EXPECT_EQ(f2.g.rows, 4);
  EXPECT_EQ(f2.at.rows, 2);
  const auto f4 = WinogradVariant::f4x4_3x3();
  EXPECT_EQ(f4.bt.rows, 6);
  EXPECT_EQ(f4.g.cols, 3);
  EXPECT_EQ(f4.at.rows, 4);
  const auto s2 = WinogradVariant::f2x2_3x3_stride2();
  EXPECT_EQ(s2.bt.rows, 5);
  EXPECT_EQ(s2.bt.cols, 5);
  EXPECT_EQ(s2.g.rows, 5);
  EXPECT_EQ(s2.g.cols, 3);
  EXPECT_EQ(s2.at.rows, 2);
  EXPECT_EQ(s2.at.cols, 5);
  for (const auto& v : all_variants()) {
    EXPECT_TRUE(v.bt.is_integer());
    EXPECT_TRUE(v.at.is_integer());
  }
  EXPECT_FALSE(f2.g.is_integer());
  EXPECT_TRUE(s2.g.is_integer());
}

TEST(Winograd, UnsupportedVariants) {
  EXPECT_THROW(WinogradVariant::select(2, 1, 1), UnsupportedVariant);
  EXPECT_THROW(WinogradVariant::select(4, 3, 2), UnsupportedVariant);
  EXPECT_THROW(WinogradVariant::select(3, 3, 1), UnsupportedVariant);
  EXPECT_THROW(winograd_conv(Tensor<double>({1, 1, 8, 8}), Tensor<double>({1, 1, 1, 1}), WinogradVariant::f2x2_3x3()),
               UnsupportedVariant);
  EXPECT_THROW(winograd_conv(Tensor<double>({1, 1, 8, 8}), Tensor<double>({1, 1, 3, 3}), WinogradVariant::f2x2_3x3(),
                             {2, 0, 1}),
               UnsupportedVariant);
}

TEST(Winograd, IdentityFilterCropsInput) {
  std::mt19937_64 rng(9);
  for (const auto& v : all_variants()) {
    const auto x = rand_int_tensor({1, 2, 9, 9}, rng);
    Tensor<Rational> w({2, 2, 3, 3});
    w.at(0, 0, 1, 1) = 1;
    w.at(1, 1, 1, 1) = 1;
    const auto y = winograd_conv(x, w, v, {v.stride, 0, 1});
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < y.shape().h; ++i)
        for (int j = 0; j < y.shape().w; ++j)
          EXPECT_EQ(y.at(0, c, i, j), x.at(0, c, 1 + i * v.stride, 1 + j * v.stride));
  }
}

TEST(Winograd, RationalEqualsDirectOnRandomLayers) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim(3, 16), ch(1, 8), padd(0, 1);
  for (const auto& v : all_variants()) {
    for (int trial = 0; trial < 20; ++trial) {
      const int h = dim(rng), w = dim(rng), c = ch(rng), k = ch(rng), pad = padd(rng);
      const auto x = rand_int_tensor({1, c, h, w}, rng);
      const auto f = rand_int_tensor({k, c, 3, 3}, rng);
      const ConvParams p{v.stride, pad, 1};
      ASSERT_EQ(winograd_conv(x, f, v, p), direct_conv(x, f, p)) << v.name() << " " << h << "x" << w;
    }
  }
}

TEST(Winograd, DepthwiseGroups) {
  std::mt19937_64 rng(23);
  for (const auto& v : all_variants()) {
    const auto x = rand_int_tensor({1, 6, 10, 10}, rng);
    const auto f = rand_int_tensor({6, 1, 3, 3}, rng);
    const ConvParams p{v.stride, 1, 6};
    EXPECT_EQ(winograd_conv(x, f, v, p), direct_conv(x, f, p));
  }
}

TEST(Winograd, ZeroTileTransformsToZero) {
  TileTransforms<Rational> tt(WinogradVariant::f2x2_3x3());
  std::vector<Rational> z(16);
  for (const auto& e : tt.input(z.data())) EXPECT_EQ(e, Rational(0));
}

TEST(Winograd, ConstantTileAgainstMatrixAlgebra) {
  const auto v = WinogradVariant::f2x2_3x3();
  TileTransforms<Rational> tt(v);
  std::vector<Rational> ones(16, Rational(1));
  const auto got = tt.input(ones.data());
  // B^T 1 B = (B^T 1)(1^T B), with B^T 1 the row sums of B^T.
  std::vector<Rational> rs(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) rs[i] += v.bt.at(i, j);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(got[i * 4 + j], rs[i] * rs[j]);
}

TEST(Tiling, SevenBySevenInputGivesNineTiles) {
  const auto g = TileGeometry::make(7, 7, WinogradVariant::f2x2_3x3());
  EXPECT_EQ(g.out_h, 5);
  EXPECT_EQ(g.tiles_h, 3);
  EXPECT_EQ(g.tiles(), 9);
  EXPECT_EQ(g.pad_bottom, 1);
  EXPECT_EQ(g.pad_right, 1);
  std::mt19937_64 rng(1);
  const auto x = rand_int_tensor({1, 1, 7, 7}, rng);
  const auto ts = tile_and_pad(x, g);
  // Rightmost column of the last tile column is padding.
  const Rational* last = ts.data.data() + ts.tile_offset(0, 0, 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(last[i * 4 + 3], Rational(0));
    EXPECT_EQ(last[3 * 4 + i], Rational(0));
  }
}

TEST(Tiling, SingleTileNeedsNoPadding) {
  for (const auto& v : all_variants()) {
    const auto g = TileGeometry::make(v.n(), v.n(), v);
    EXPECT_EQ(g.tiles(), 1) << v.name();
    EXPECT_EQ(g.pad_bottom, 0);
    EXPECT_EQ(g.pad_right, 0);
  }
}

TEST(Tiling, UntileInvertsTile) {
  std::mt19937_64 rng(2);
  for (const auto& v : all_variants())
    for (int h : {4, 7, 8, 13, 16}) {
      const auto x = rand_int_tensor({2, 3, h, h + 1}, rng);
      const auto g = TileGeometry::make(h, h + 1, v);
      const auto back = untile_input(tile_and_pad(x, g));
      // Rows/columns the conv reads; a strided conv may skip the last one.
      const int used_h = (g.out_h - 1) * v.stride + v.r;
      const int used_w = (g.out_w - 1) * v.stride + v.r;
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < used_h; ++i)
            for (int j = 0; j < used_w; ++j) ASSERT_EQ(back.at(b, c, i, j), x.at(b, c, i, j)) << v.name();
    }
}

TEST(Counts, Goldens) {
  EXPECT_EQ(regular_mults_1d(2, 3), 6);
  EXPECT_EQ(winograd_mults_1d(2, 3), 4);
  EXPECT_EQ(regular_mults_per_tile(2, 3), 36);
  EXPECT_EQ(winograd_mults_per_tile(WinogradVariant::f2x2_3x3()), 16);
  EXPECT_EQ(regular_mults_per_tile(4, 3), 144);
  EXPECT_EQ(winograd_mults_per_tile(WinogradVariant::f4x4_3x3()), 36);
}

TEST(FixedPoint, F2IsBitExactAgainstDirect) {
  RingConfig cfg;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-4, 4);
  for (const auto& v : {WinogradVariant::f2x2_3x3(), WinogradVariant::f2x2_3x3_stride2()}) {
    Tensor<double> x({1, 4, 10, 10}), w({3, 4, 3, 3});
    for (auto& e : x.vec()) e = u(rng);
    for (auto& e : w.vec()) e = quantize(u(rng), cfg);
    const auto fx = FixedTensor::encode(x, cfg);
    const ConvParams p{v.stride, 1, 1};
    EXPECT_EQ(winograd_conv_fixed(fx, w, v, p, default_filter_extra_bits(v)), direct_conv_fixed(fx, w, p)) << v.name();
  }
}

TEST(FixedPoint, F4WithinTolerance) {
  RingConfig cfg{64, 12, 128};
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-2, 2);
  const auto v = WinogradVariant::f4x4_3x3();
  Tensor<double> x({1, 8, 12, 12}), w({4, 8, 3, 3});
  for (auto& e : x.vec()) e = quantize(u(rng), cfg);
  for (auto& e : w.vec()) e = quantize(u(rng), cfg);
  const auto got = winograd_conv_fixed(FixedTensor::encode(x, cfg), w, v, {1, 1, 1}, 20).decode();
  const auto ref = direct_conv(x, w, {1, 1, 1});
  for (size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], std::ldexp(1.0, -cfg.scale + 2));
}

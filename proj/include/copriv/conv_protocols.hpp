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

// Secure convolutions. The input is secret-shared; filters are server
// plaintext and enter the multiplications as the trivial sharing (W, 0).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "copriv/engine.hpp"
#include "copriv/winograd.hpp"

namespace copriv {

enum class ConvProtocolKind { RegularBatched, WinogradEWMM, WinogradGEMM };

inline const char* kind_name(ConvProtocolKind k) {
  switch (k) {
    case ConvProtocolKind::RegularBatched: return "regular";
    case ConvProtocolKind::WinogradEWMM: return "winograd-ewmm";
    case ConvProtocolKind::WinogradGEMM: return "winograd-gemm";
  }
  return "unknown";
}

/// Whose operand is the shared multiplier of each batched group.
enum class SenderChoice { Server, Client, Auto };

inline const char* sender_name(SenderChoice s) {
  switch (s) {
    case SenderChoice::Server: return "server";
    case SenderChoice::Client: return "client";
    case SenderChoice::Auto: return "auto";
  }
  return "unknown";
}

/// argmin of n^2 C T (lambda + K) and n^2 C K (lambda + T). Both sides share
/// n^2 C, and the difference is lambda (T - K), so the client variant wins
/// exactly when K < T. Ties go to the server. K is per group.
inline SenderChoice resolve_sender(SenderChoice requested, int64_t k_per_group, int64_t tiles) {
  if (requested != SenderChoice::Auto) return requested;
  return k_per_group < tiles ? SenderChoice::Client : SenderChoice::Server;
}

/// Everything fixed before a Winograd conv runs.
struct WinogradPlan {
  WinogradVariant variant;
  TileGeometry geom;
  ConvParams params;
  int extra_bits = 0;
  SenderChoice sender = SenderChoice::Server;

  static WinogradPlan make(const Shape4& input, const Shape4& filter, const ConvParams& p, int m,
                           SenderChoice requested = SenderChoice::Auto, int extra_bits = -1) {
    if (filter.h != filter.w) throw UnsupportedVariant("Winograd needs a square filter, got " + filter.str());
    WinogradPlan plan;
    plan.variant = WinogradVariant::select(m, filter.h, p.stride);
    detail::check_conv_dims(input, filter, p);
    plan.geom = TileGeometry::make(input.h + 2 * p.pad, input.w + 2 * p.pad, plan.variant);
    plan.params = p;
    plan.extra_bits = extra_bits < 0 ? default_filter_extra_bits(plan.variant) : extra_bits;
    plan.sender = resolve_sender(requested, filter.n / p.groups, plan.geom.tiles());
    return plan;
  }
};

/// Winograd-domain operands, aggregated per tile pixel xi = (xi, nu).
/// U is [k][c_local][xi] (server plaintext, scale + extra_bits); V is
/// [c][b][t][xi] (one party's share, scale).
struct TransformedOperands {
  int nn = 0;
  int batch = 0;
  int channels = 0;
  int filters = 0;
  int groups = 1;
  int tiles = 0;
  std::vector<uint64_t> U;
  std::array<std::vector<uint64_t>, 2> V;

  int cpg() const { return channels / groups; }
  int kpg() const { return filters / groups; }
  size_t u_index(int k, int cc, int xi) const { return (static_cast<size_t>(k) * cpg() + cc) * nn + xi; }
  size_t v_index(int c, int b, int t, int xi) const {
    return ((static_cast<size_t>(c) * batch + b) * tiles + t) * nn + xi;
  }
};

/// Filter transform G W G^T on real weights, then one encoding.
inline std::vector<uint64_t> transform_filter_operand(const Tensor<double>& w, const WinogradPlan& plan,
                                                      const RingConfig& cfg) {
  const Tensor<uint64_t> u = encode_transformed_filters(w, plan.variant, cfg, plan.extra_bits);
  return u.vec();  // (K, C/groups, n, n) is already [k][c_local][xi]
}

/// Input transform B^T X B of one party's share, tile by tile, in the ring.
/// Linear, so each party runs it locally on its share.
inline std::vector<uint64_t> transform_input_operand(const FixedTensor& share_payload, const WinogradPlan& plan) {
  const RingConfig& cfg = share_payload.cfg;
  const Tensor<uint64_t> x(share_payload.shape, share_payload.data);
  const Tensor<uint64_t> padded = pad_input(x, plan.params.pad);
  const TileSet<uint64_t> ts = tile_and_pad(padded, plan.geom);
  TileTransforms<uint64_t> tt(plan.variant, /*with_filter=*/false);
  const int nn = plan.variant.n() * plan.variant.n();
  const int T = plan.geom.tiles();
  const int N = share_payload.shape.n;
  const int C = share_payload.shape.c;
  std::vector<uint64_t> out(static_cast<size_t>(C) * N * T * nn);
  for (int b = 0; b < N; ++b)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T; ++t) {
        const auto v = tt.input(ts.data.data() + ts.tile_offset(b, c, t));
        uint64_t* dst = out.data() + ((static_cast<size_t>(c) * N + b) * T + t) * nn;
        for (int e = 0; e < nn; ++e) dst[e] = v[static_cast<size_t>(e)] & cfg.mask();
      }
  return out;
}

inline TransformedOperands transform_operands(const SharePair& x, const Tensor<double>& w, const WinogradPlan& plan,
                                              const RingConfig& cfg) {
  TransformedOperands ops;
  ops.nn = plan.variant.n() * plan.variant.n();
  ops.batch = x.shape().n;
  ops.channels = x.shape().c;
  ops.filters = w.shape().n;
  ops.groups = plan.params.groups;
  ops.tiles = plan.geom.tiles();
  ops.U = transform_filter_operand(w, plan, cfg);
  for (Party p : kParties) ops.V[idx(p)] = transform_input_operand(x.of(p).payload, plan);
  return ops;
}

/// A conv result before its final rescale.
struct ConvOutput {
  SharePair y;
  int pending_shift = 0;  // fractional bits to drop to return to cfg.scale
  SenderChoice sender = SenderChoice::Server;
};

namespace detail {

/// Group descriptor for batched products whose operands and results sit at
/// affine offsets: product i of group g is mul[mul_at] * co[co_at + i * co_step],
/// accumulated into acc[sink_at + i * sink_step].
struct AffineGroup {
  size_t mul_at = 0;
  size_t co_at = 0;
  size_t co_step = 0;
  size_t sink_at = 0;
  size_t sink_step = 0;
};

/// Runs one packed Beaver round where the multiplier comes from `mul_src`,
/// co-operands from `co_src` (per party) and products are summed into
/// `acc` (per party). `describe(g)` yields the group layout.
template <class Describe>
void affine_products(Runtime& rt, OpTag tag, size_t groups, size_t t, const std::array<const std::vector<uint64_t>*, 2>& mul_src,
                     const std::array<const std::vector<uint64_t>*, 2>& co_src, std::array<std::vector<uint64_t>, 2>& acc,
                     Describe&& describe) {
  TripleTape tape = rt.dealer().tape(groups, t, tag);
  const uint64_t mask = rt.cfg().mask();
  std::array<size_t, 2> cached_g{SIZE_MAX, SIZE_MAX};
  std::array<AffineGroup, 2> cached{};
  auto desc = [&](Party p, size_t g) -> const AffineGroup& {
    if (cached_g[idx(p)] != g) {
      cached[idx(p)] = describe(g);
      cached_g[idx(p)] = g;
    }
    return cached[idx(p)];
  };
  beaver_batched(
      rt, tape, tag, [&](Party p, size_t g) { return (*mul_src[idx(p)])[desc(p, g).mul_at]; },
      [&](Party p, size_t g, size_t i) {
        const AffineGroup& d = desc(p, g);
        return (*co_src[idx(p)])[d.co_at + i * d.co_step];
      },
      [&](Party p, size_t g, size_t i, uint64_t z) {
        const AffineGroup& d = desc(p, g);
        uint64_t& a = acc[idx(p)][d.sink_at + i * d.sink_step];
        a = (a + z) & mask;
      });
}

inline SharePair make_pair(const Shape4& s, const RingConfig& cfg, uint64_t session) {
  return {{Party::Server, FixedTensor(s, cfg), session}, {Party::Client, FixedTensor(s, cfg), session}};
}

/// Output transform A^T M A per (k, b, t) and untiling, for one party.
inline FixedTensor finish_winograd(const std::vector<uint64_t>& m_acc, const WinogradPlan& plan, int batch, int filters,
                                   const RingConfig& cfg) {
  const int nn = plan.variant.n() * plan.variant.n();
  const int mm = plan.variant.m * plan.variant.m;
  const int T = plan.geom.tiles();
  TileTransforms<uint64_t> tt(plan.variant, /*with_filter=*/false);
  std::vector<uint64_t> tiles(static_cast<size_t>(batch) * filters * T * mm);
  std::vector<uint64_t> mt(static_cast<size_t>(nn));
  for (int k = 0; k < filters; ++k)
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < T; ++t) {
        const uint64_t* src = m_acc.data() + ((static_cast<size_t>(k) * batch + b) * T + t) * nn;
        std::copy(src, src + nn, mt.begin());
        const auto y = tt.output(mt);
        uint64_t* dst = tiles.data() + ((static_cast<size_t>(b) * filters + k) * T + t) * mm;
        for (int e = 0; e < mm; ++e) dst[e] = y[static_cast<size_t>(e)] & cfg.mask();
      }
  const Tensor<uint64_t> out = untile_output(tiles, batch, filters, plan.geom);
  return FixedTensor(out.shape(), out.vec(), cfg);
}

inline void check_filter(const SharePair& x, const Tensor<double>& w, const ConvParams& p) {
  check_conv_dims(x.shape(), w.shape(), p);
}

}  // namespace detail

/// Regular convolution with batched multiplication: every filter weight is
/// a shared multiplier reused across all output positions (im2col columns).
inline ConvOutput conv_regular_raw(Runtime& rt, const SharePair& x, const Tensor<double>& w, const ConvParams& p) {
  detail::check_filter(x, w, p);
  const RingConfig cfg = rt.cfg();
  const Shape4 in = x.shape();
  const Shape4 f = w.shape();
  const int rh = f.h, rw = f.w;
  const int ho = conv_out_size(in.h, rh, p.stride, p.pad);
  const int wo = conv_out_size(in.w, rw, p.stride, p.pad);
  const int cpg = in.c / p.groups;
  const int kpg = f.n / p.groups;
  const size_t P = static_cast<size_t>(in.n) * ho * wo;  // co-operands per weight
  const size_t taps = static_cast<size_t>(rh) * rw;

  // im2col of each share: [c][tap][b][pos].
  std::array<std::vector<uint64_t>, 2> col;
  for (Party p_ : kParties) {
    auto& cv = col[idx(p_)];
    cv.assign(static_cast<size_t>(in.c) * taps * P, 0);
    const auto& xs = x.of(p_).payload.data;
    for (int c = 0; c < in.c; ++c)
      for (int i = 0; i < rh; ++i)
        for (int j = 0; j < rw; ++j) {
          uint64_t* dst = cv.data() + ((static_cast<size_t>(c) * taps + i * rw + j) * P);
          for (int b = 0; b < in.n; ++b)
            for (int oy = 0; oy < ho; ++oy)
              for (int ox = 0; ox < wo; ++ox) {
                const int y = oy * p.stride + i - p.pad;
                const int xx = ox * p.stride + j - p.pad;
                if (y >= 0 && y < in.h && xx >= 0 && xx < in.w) *dst = xs[in.index(b, c, y, xx)];
                ++dst;
              }
        }
  }
  // Weights as the trivial sharing (W, 0): [k][c_local][tap].
  std::vector<uint64_t> w_server(w.size()), w_client(w.size(), 0);
  for (size_t i = 0; i < w.size(); ++i) w_server[i] = encode(w[i], cfg).value;

  std::array<std::vector<uint64_t>, 2> acc{std::vector<uint64_t>(static_cast<size_t>(f.n) * P, 0),
                                           std::vector<uint64_t>(static_cast<size_t>(f.n) * P, 0)};
  const size_t groups = static_cast<size_t>(f.n) * cpg * taps;
  detail::affine_products(rt, OpTag::ConvRegular, groups, P, {&w_server, &w_client}, {&col[0], &col[1]}, acc,
                          [&](size_t g) {
                            const size_t tap = g % taps;
                            const size_t cc = (g / taps) % cpg;
                            const size_t k = g / (taps * cpg);
                            const size_t c = (k / kpg) * cpg + cc;
                            return detail::AffineGroup{g, (c * taps + tap) * P, 1, k * P, 1};
                          });

  const Shape4 os{in.n, f.n, ho, wo};
  ConvOutput out{detail::make_pair(os, cfg, rt.new_session()), cfg.scale, SenderChoice::Server};
  for (Party p_ : kParties) {
    auto& dst = out.y.of(p_).payload.data;
    for (int k = 0; k < f.n; ++k)
      for (int b = 0; b < in.n; ++b)
        for (int q = 0; q < ho * wo; ++q)
          dst[os.index(b, k, q / wo, q % wo)] = acc[idx(p_)][static_cast<size_t>(k) * P + static_cast<size_t>(b) * ho * wo + q];
  }
  return out;
}

/// Winograd with every Winograd-domain product as its own multiplication
/// (no multiplier reuse).
inline ConvOutput conv_winograd_ewmm_raw(Runtime& rt, const SharePair& x, const Tensor<double>& w, const WinogradPlan& plan) {
  detail::check_filter(x, w, plan.params);
  const RingConfig cfg = rt.cfg();
  const TransformedOperands ops = transform_operands(x, w, plan, cfg);
  const std::vector<uint64_t> u_client(ops.U.size(), 0);
  const int N = ops.batch, K = ops.filters, T = ops.tiles, nn = ops.nn, cpg = ops.cpg(), kpg = ops.kpg();
  std::array<std::vector<uint64_t>, 2> acc{std::vector<uint64_t>(static_cast<size_t>(K) * N * T * nn, 0),
                                           std::vector<uint64_t>(static_cast<size_t>(K) * N * T * nn, 0)};
  // Group order: xi, b, k, c_local, t.
  const size_t per_xi = static_cast<size_t>(N) * K * cpg * T;
  detail::affine_products(rt, OpTag::ConvEwmm, per_xi * nn, 1, {&ops.U, &u_client}, {&ops.V[0], &ops.V[1]}, acc,
                          [&](size_t g) {
                            const int xi = static_cast<int>(g / per_xi);
                            size_t r = g % per_xi;
                            const int t = static_cast<int>(r % T);
                            r /= T;
                            const int cc = static_cast<int>(r % cpg);
                            r /= cpg;
                            const int k = static_cast<int>(r % K);
                            const int b = static_cast<int>(r / K);
                            const int c = (k / kpg) * cpg + cc;
                            const size_t sink = ((static_cast<size_t>(k) * N + b) * T + t) * nn + xi;
                            return detail::AffineGroup{ops.u_index(k, cc, xi), ops.v_index(c, b, t, xi), 0, sink, 0};
                          });
  ConvOutput out{detail::make_pair({1, 1, 1, 1}, cfg, rt.new_session()), cfg.scale + plan.extra_bits, SenderChoice::Server};
  for (Party p : kParties) out.y.of(p).payload = detail::finish_winograd(acc[idx(p)], plan, N, K, cfg);
  return out;
}

/// Winograd with tile aggregation: per tile pixel one (K x C) * (C x T)
/// GEMM, batched along the sender's operand. All pixels share one round.
inline ConvOutput conv_winograd_gemm_raw(Runtime& rt, const SharePair& x, const Tensor<double>& w, const WinogradPlan& plan) {
  detail::check_filter(x, w, plan.params);
  const RingConfig cfg = rt.cfg();
  const TransformedOperands ops = transform_operands(x, w, plan, cfg);
  const std::vector<uint64_t> u_client(ops.U.size(), 0);
  const int N = ops.batch, K = ops.filters, T = ops.tiles, nn = ops.nn, cpg = ops.cpg(), kpg = ops.kpg();
  std::array<std::vector<uint64_t>, 2> acc{std::vector<uint64_t>(static_cast<size_t>(K) * N * T * nn, 0),
                                           std::vector<uint64_t>(static_cast<size_t>(K) * N * T * nn, 0)};
  const size_t NT = static_cast<size_t>(N) * T;
  if (plan.sender == SenderChoice::Server) {
    // Multiplier V[c][b][t][xi], reused across the kpg filters of c's group.
    const size_t per_xi = static_cast<size_t>(ops.channels) * NT;
    detail::affine_products(rt, OpTag::ConvGemm, per_xi * nn, static_cast<size_t>(kpg), {&ops.V[0], &ops.V[1]},
                            {&ops.U, &u_client}, acc, [&](size_t g) {
                              const int xi = static_cast<int>(g / per_xi);
                              const size_t r = g % per_xi;
                              const size_t bt = r % NT;  // b * T + t
                              const int c = static_cast<int>(r / NT);
                              const int grp = c / cpg;
                              const int cc = c % cpg;
                              const int k0 = grp * kpg;
                              return detail::AffineGroup{ops.v_index(c, 0, 0, xi) + bt * nn, ops.u_index(k0, cc, xi),
                                                         static_cast<size_t>(cpg) * nn,
                                                         (static_cast<size_t>(k0) * NT + bt) * nn + xi, NT * nn};
                            });
  } else {
    // Multiplier U[k][c_local][xi], reused across all N * T tiles.
    const size_t per_xi = static_cast<size_t>(K) * cpg;
    detail::affine_products(rt, OpTag::ConvGemm, per_xi * nn, NT, {&ops.U, &u_client}, {&ops.V[0], &ops.V[1]}, acc,
                            [&](size_t g) {
                              const int xi = static_cast<int>(g / per_xi);
                              const size_t r = g % per_xi;
                              const int cc = static_cast<int>(r % cpg);
                              const int k = static_cast<int>(r / cpg);
                              const int c = (k / kpg) * cpg + cc;
                              return detail::AffineGroup{ops.u_index(k, cc, xi), ops.v_index(c, 0, 0, xi),
                                                         static_cast<size_t>(nn),
                                                         static_cast<size_t>(k) * NT * nn + xi, static_cast<size_t>(nn)};
                            });
  }
  ConvOutput out{detail::make_pair({1, 1, 1, 1}, cfg, rt.new_session()), cfg.scale + plan.extra_bits, plan.sender};
  for (Party p : kParties) out.y.of(p).payload = detail::finish_winograd(acc[idx(p)], plan, N, K, cfg);
  return out;
}

inline SharePair finish(Runtime& rt, ConvOutput&& o) { return truncate(rt, o.y, o.pending_shift); }

/// Regular conv, rescaled to cfg.scale.
inline SharePair conv_regular(Runtime& rt, const SharePair& x, const Tensor<double>& w, const ConvParams& p = {}) {
  return finish(rt, conv_regular_raw(rt, x, w, p));
}

inline SharePair conv_winograd_ewmm(Runtime& rt, const SharePair& x, const Tensor<double>& w, const WinogradVariant& v,
                                    const ConvParams& p = {}, int extra_bits = -1) {
  const auto plan = WinogradPlan::make(x.shape(), w.shape(), p, v.m, SenderChoice::Server, extra_bits);
  if (plan.variant.stride != v.stride) throw UnsupportedVariant("variant stride does not match the conv");
  return finish(rt, conv_winograd_ewmm_raw(rt, x, w, plan));
}

inline SharePair conv_winograd_gemm(Runtime& rt, const SharePair& x, const Tensor<double>& w, const WinogradVariant& v,
                                    SenderChoice sender, const ConvParams& p = {}, int extra_bits = -1) {
  const auto plan = WinogradPlan::make(x.shape(), w.shape(), p, v.m, sender, extra_bits);
  if (plan.variant.stride != v.stride) throw UnsupportedVariant("variant stride does not match the conv");
  return finish(rt, conv_winograd_gemm_raw(rt, x, w, plan));
}

}  // namespace copriv

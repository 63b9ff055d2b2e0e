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

#include <array>
#include <cstdint>
#include <exception>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "copriv/accounting.hpp"
#include "copriv/channel.hpp"
#include "copriv/dealer.hpp"
#include "copriv/errors.hpp"
#include "copriv/ring.hpp"
#include "copriv/tensor.hpp"

namespace copriv {

/// One party's additive share of a tensor.
struct Share {
  Party party = Party::Server;
  FixedTensor payload;
  uint64_t session = 0;
};

/// Both shares of one secret, as held by the simulator.
struct SharePair {
  Share server;
  Share client;

  const Shape4& shape() const { return server.payload.shape; }
  size_t size() const { return server.payload.size(); }
  const RingConfig& cfg() const { return server.payload.cfg; }
  Share& of(Party p) { return p == Party::Server ? server : client; }
  const Share& of(Party p) const { return p == Party::Server ? server : client; }
};

/// Split x into a uniformly random server share and the matching client share.
inline SharePair share(const FixedTensor& x, std::mt19937_64& rng, uint64_t session = 0) {
  SharePair out{{Party::Server, FixedTensor(x.shape, x.cfg), session}, {Party::Client, FixedTensor(x.shape, x.cfg), session}};
  const uint64_t mask = x.cfg.mask();
  for (size_t i = 0; i < x.size(); ++i) {
    out.server.payload.data[i] = rng() & mask;
    out.client.payload.data[i] = (x.data[i] - out.server.payload.data[i]) & mask;
  }
  return out;
}

/// A value the server knows in the clear, as the trivial sharing (x, 0).
inline SharePair share_known_to_server(const FixedTensor& x, uint64_t session = 0) {
  return {{Party::Server, x, session}, {Party::Client, FixedTensor(x.shape, x.cfg), session}};
}

inline FixedTensor reconstruct(const Share& a, const Share& b) {
  if (a.party == b.party) throw InputError("reconstruct needs one share from each party");
  if (a.session != b.session) throw InputError("shares belong to different sessions");
  if (!(a.payload.shape == b.payload.shape) || !(a.payload.cfg == b.payload.cfg)) {
    throw InputError("share dimensions differ: " + a.payload.shape.str() + " vs " + b.payload.shape.str());
  }
  FixedTensor out(a.payload.shape, a.payload.cfg);
  const uint64_t mask = a.payload.cfg.mask();
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = (a.payload.data[i] + b.payload.data[i]) & mask;
  return out;
}

inline FixedTensor reconstruct(const SharePair& x) { return reconstruct(x.server, x.client); }

/// Local, communication-free addition.
inline SharePair add(const SharePair& x, const SharePair& y) {
  if (!(x.shape() == y.shape())) throw InputError("add: shape mismatch " + x.shape().str() + " vs " + y.shape().str());
  SharePair out = x;
  const uint64_t mask = x.cfg().mask();
  for (Party p : kParties) {
    auto& o = out.of(p).payload.data;
    const auto& v = y.of(p).payload.data;
    for (size_t i = 0; i < o.size(); ++i) o[i] = (o[i] + v[i]) & mask;
  }
  return out;
}

/// Add a public per-channel constant (e.g. a bias) at the given scale.
inline SharePair add_channel_constant(const SharePair& x, const std::vector<uint64_t>& per_channel) {
  SharePair out = x;
  const Shape4 s = x.shape();
  if (per_channel.size() != static_cast<size_t>(s.c)) throw InputError("bias length does not match channels");
  const uint64_t mask = x.cfg().mask();
  auto& d = out.server.payload.data;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
          const size_t i = s.index(n, c, h, w);
          d[i] = (d[i] + per_channel[static_cast<size_t>(c)]) & mask;
        }
  return out;
}

enum class Schedule { Sequential, Threaded };

struct RuntimeOptions {
  RingConfig cfg{};
  CostConstants constants{};
  uint64_t seed = 1;
  Schedule schedule = Schedule::Sequential;
  bool transcript = false;
};

/// The two-party runtime: channel, dealer and scheduler. Protocol code is
/// written once against exchange(); the scheduler decides whether the two
/// parties run interleaved on one thread or on two threads.
class Runtime {
 public:
  explicit Runtime(const RuntimeOptions& opt)
      : opt_(opt),
        ch_(opt.transcript),
        dealer_(opt.seed ^ 0x5DEECE66DULL, opt.cfg, ch_, opt.constants.k_ot),
        rng_(opt.seed) {
    opt_.cfg.validate();
    opt_.constants.validate();
    if (opt_.constants.c_trunc < kTruncWireElems) {
      throw InputError("c_trunc must be at least " + std::to_string(kTruncWireElems) + " (elements opened on the wire)");
    }
    if (opt_.constants.c_relu < kReluWireElems) {
      throw InputError("c_relu must be at least " + std::to_string(kReluWireElems) + " (elements opened on the wire)");
    }
  }

  const RingConfig& cfg() const { return opt_.cfg; }
  const CostConstants& constants() const { return opt_.constants; }
  const RuntimeOptions& options() const { return opt_; }
  Channel& channel() { return ch_; }
  const Channel& channel() const { return ch_; }
  Dealer& dealer() { return dealer_; }
  std::mt19937_64& rng() { return rng_; }
  uint64_t new_session() { return ++session_; }

  /// Run f(party) for both parties.
  template <class F>
  void both(F&& f) {
    if (opt_.schedule == Schedule::Sequential) {
      for (Party p : kParties) f(p);
      return;
    }
    std::exception_ptr err[2];
    auto guarded = [&](Party p) {
      try {
        f(p);
      } catch (...) {
        err[idx(p)] = std::current_exception();
        ch_.abort();
      }
    };
    std::thread client(guarded, Party::Client);
    guarded(Party::Server);
    client.join();
    for (auto& e : err)
      if (e) std::rethrow_exception(e);
  }

  /// One communication round: each party builds a message with make(p),
  /// sends it, receives the peer's, then runs done(p, own, peer). Returns the
  /// round index.
  template <class Make, class Done>
  uint32_t exchange(Phase phase, OpTag tag, Make&& make, Done&& done) {
    const uint32_t round = ch_.begin_round();
    const RingConfig cfg = opt_.cfg;
    if (opt_.schedule == Schedule::Sequential) {
      std::array<std::vector<uint64_t>, 2> own;
      for (Party p : kParties) {
        own[idx(p)] = make(p);
        ch_.send(p, phase, tag, round, pack_elems(own[idx(p)], cfg));
      }
      for (Party p : kParties) {
        const auto peer = unpack_elems(ch_.recv(p), cfg);
        done(p, own[idx(p)], peer);
      }
    } else {
      both([&](Party p) {
        const std::vector<uint64_t> mine = make(p);
        ch_.send(p, phase, tag, round, pack_elems(mine, cfg));
        const auto peer = unpack_elems(ch_.recv(p), cfg);
        done(p, mine, peer);
      });
    }
    return round;
  }

  /// Charge the part of an element-wise op's budget that is not on the wire.
  void charge_remainder(OpTag tag, uint32_t round, size_t elems, double c, int wire_elems) {
    const uint64_t total = elementwise_online_bytes(elems, c, opt_.cfg);
    const uint64_t wire = static_cast<uint64_t>(wire_elems) * elems * static_cast<uint64_t>(opt_.cfg.bytes_per_elem());
    if (total < wire) throw ProtocolError("online constant below the wire traffic of its protocol");
    ch_.charge(Party::Server, Phase::Online, tag, round, total - wire);
  }

  TranscriptHeader transcript_header() const { return {opt_.cfg.l, opt_.constants.k_ot}; }

 private:
  RuntimeOptions opt_;
  Channel ch_;
  Dealer dealer_;
  std::mt19937_64 rng_;
  uint64_t session_ = 0;
};

/// Batched Beaver evaluation. For every group g the multiplier share is
/// mul(p, g) and the co-operand shares are co(p, g, i), i < t; the product
/// share is delivered through sink(p, g, i, z). All openings travel in one
/// round. `triples` is a BeaverTriple or a TripleTape.
template <class Triples, class Mul, class Co, class Sink>
uint32_t beaver_batched(Runtime& rt, const Triples& triples, OpTag tag, Mul&& mul, Co&& co, Sink&& sink) {
  const size_t G = triples.groups();
  const size_t t = triples.t();
  const RingConfig cfg = rt.cfg();
  const uint64_t mask = cfg.mask();
  return rt.exchange(
      Phase::Online, tag,
      [&](Party p) {
        std::vector<uint64_t> msg(G + G * t);
        triples.visit(p, [&](size_t g, uint64_t a, const uint64_t* b, const uint64_t*) {
          msg[g] = (mul(p, g) - a) & mask;
          for (size_t i = 0; i < t; ++i) msg[G + g * t + i] = (co(p, g, i) - b[i]) & mask;
        });
        return msg;
      },
      [&](Party p, const std::vector<uint64_t>& mine, const std::vector<uint64_t>& peer) {
        if (peer.size() != mine.size()) throw ProtocolError("peer opened a different number of values");
        const uint64_t lead = p == Party::Server ? 1 : 0;
        triples.visit(p, [&](size_t g, uint64_t a, const uint64_t* b, const uint64_t* c) {
          const uint64_t d = mine[g] + peer[g];
          for (size_t i = 0; i < t; ++i) {
            const size_t j = G + g * t + i;
            const uint64_t e = mine[j] + peer[j];
            sink(p, g, i, (c[i] + d * b[i] + e * a + lead * d * e) & mask);
          }
        });
      });
}

namespace detail {

struct TripleView {
  const BeaverTriple& tr;
  size_t groups() const { return tr.groups; }
  size_t t() const { return tr.t; }
  template <class F>
  void visit(Party p, F&& f) const { tr.visit(p, f); }
};

inline void claim(BeaverTriple& tr) {
  if (tr.used) throw ProtocolError("Beaver triple reused");
  tr.used = true;
}

}  // namespace detail

/// Element-wise product of two shared tensors.
inline SharePair mul_shared(Runtime& rt, const SharePair& x, const SharePair& y, BeaverTriple& tr) {
  if (!(x.shape() == y.shape())) throw InputError("mul: shape mismatch " + x.shape().str() + " vs " + y.shape().str());
  if (tr.t != 1 || tr.groups != x.size()) throw ProtocolError("triple does not match the multiplication size");
  detail::claim(tr);
  const uint64_t sess = rt.new_session();
  SharePair out{{Party::Server, FixedTensor(x.shape(), x.cfg()), sess}, {Party::Client, FixedTensor(x.shape(), x.cfg()), sess}};
  beaver_batched(
      rt, detail::TripleView{tr}, OpTag::Mul, [&](Party p, size_t g) { return x.of(p).payload.data[g]; },
      [&](Party p, size_t g, size_t) { return y.of(p).payload.data[g]; },
      [&](Party p, size_t g, size_t, uint64_t z) { out.of(p).payload.data[g] = z; });
  return out;
}

/// Convenience: draw a fresh triple from the dealer and multiply.
inline SharePair mul_shared(Runtime& rt, const SharePair& x, const SharePair& y) {
  BeaverTriple tr = rt.dealer().triple(x.size(), 1, OpTag::Mul);
  return mul_shared(rt, x, y, tr);
}

/// Products multiplier[g] * co[g * t + i] for every group g and i < t, where
/// t = co.size() / multiplier.size(). Output shape is (groups, t, 1, 1).
inline SharePair batched_mul(Runtime& rt, const SharePair& multiplier, const SharePair& co, BeaverTriple& tr) {
  const size_t G = multiplier.size();
  if (G == 0 || co.size() == 0) throw InputError("empty multiplication batch");
  if (co.size() % G != 0) throw InputError("co-operand count is not a multiple of the multiplier count");
  const size_t t = co.size() / G;
  if (tr.groups != G || tr.t != t) throw ProtocolError("triple does not match the batch shape");
  detail::claim(tr);
  const uint64_t sess = rt.new_session();
  const Shape4 s{static_cast<int>(G), static_cast<int>(t), 1, 1};
  SharePair out{{Party::Server, FixedTensor(s, co.cfg()), sess}, {Party::Client, FixedTensor(s, co.cfg()), sess}};
  beaver_batched(
      rt, detail::TripleView{tr}, OpTag::BatchedMul, [&](Party p, size_t g) { return multiplier.of(p).payload.data[g]; },
      [&](Party p, size_t g, size_t i) { return co.of(p).payload.data[g * t + i]; },
      [&](Party p, size_t g, size_t i, uint64_t z) { out.of(p).payload.data[g * t + i] = z; });
  return out;
}

inline SharePair batched_mul(Runtime& rt, const SharePair& multiplier, const SharePair& co) {
  if (multiplier.size() == 0 || co.size() == 0 || co.size() % multiplier.size() != 0) {
    throw InputError("invalid multiplication batch");
  }
  BeaverTriple tr = rt.dealer().triple(multiplier.size(), co.size() / multiplier.size(), OpTag::BatchedMul);
  return batched_mul(rt, multiplier, co, tr);
}

/// Exact signed floor division by 2^shift with dealer-assisted wrap
/// correction. One masked opening on the wire; the comparison is charged.
inline SharePair truncate(Runtime& rt, const SharePair& x, int shift) {
  const RingConfig cfg = rt.cfg();
  if (shift < 0 || shift >= cfg.l) throw InputError("truncation shift " + std::to_string(shift) + " out of range");
  if (shift == 0) return x;
  const size_t n = x.size();
  const uint64_t mask = cfg.mask();
  const uint64_t bias = 1ULL << (cfg.l - 1);
  MaskShares m = rt.dealer().masks(n, shift);
  std::vector<uint64_t> z(n);
  const uint32_t round = rt.exchange(
      Phase::Online, OpTag::TruncOpen,
      [&](Party p) {
        std::vector<uint64_t> msg(n);
        const auto& xs = x.of(p).payload.data;
        const uint64_t add = p == Party::Server ? bias : 0;
        for (size_t i = 0; i < n; ++i) msg[i] = (xs[i] + m.r[idx(p)][i] + add) & mask;
        return msg;
      },
      [&](Party p, const std::vector<uint64_t>& mine, const std::vector<uint64_t>& peer) {
        if (p != Party::Server) return;  // both parties learn the same z
        for (size_t i = 0; i < n; ++i) z[i] = (mine[i] + peer[i]) & mask;
      });
  rt.charge_remainder(OpTag::TruncCompare, round, n, rt.constants().c_trunc, kTruncWireElems);
  const auto corr = rt.dealer().trunc_correction(z, m);
  const uint64_t sess = rt.new_session();
  SharePair out{{Party::Server, FixedTensor(x.shape(), cfg), sess}, {Party::Client, FixedTensor(x.shape(), cfg), sess}};
  const uint64_t bias_high = bias >> shift;
  for (size_t i = 0; i < n; ++i) {
    out.server.payload.data[i] = ((z[i] >> shift) - m.r_high[0][i] + corr[0][i] - bias_high) & mask;
    out.client.payload.data[i] = (corr[1][i] - m.r_high[1][i]) & mask;
  }
  return out;
}

/// max(x, 0): masked opening, dealer sign oracle, then a Beaver product of
/// the shared sign bit with x.
inline SharePair relu_shared(Runtime& rt, const SharePair& x) {
  const RingConfig cfg = rt.cfg();
  const size_t n = x.size();
  const uint64_t mask = cfg.mask();
  const uint64_t bias = 1ULL << (cfg.l - 1);
  MaskShares m = rt.dealer().masks(n, 0);
  std::vector<uint64_t> z(n);
  const uint32_t round = rt.exchange(
      Phase::Online, OpTag::ReluOpen,
      [&](Party p) {
        std::vector<uint64_t> msg(n);
        const auto& xs = x.of(p).payload.data;
        const uint64_t add = p == Party::Server ? bias : 0;
        for (size_t i = 0; i < n; ++i) msg[i] = (xs[i] + m.r[idx(p)][i] + add) & mask;
        return msg;
      },
      [&](Party p, const std::vector<uint64_t>& mine, const std::vector<uint64_t>& peer) {
        if (p != Party::Server) return;
        for (size_t i = 0; i < n; ++i) z[i] = (mine[i] + peer[i]) & mask;
      });
  rt.charge_remainder(OpTag::ReluCompare, round, n, rt.constants().c_relu, kReluWireElems);
  const auto bits = rt.dealer().sign_bits(z, m);
  SharePair b = x;
  b.server.payload.data = bits[0];
  b.client.payload.data = bits[1];
  // The selection triple is part of the comparison budget, not helper data.
  BeaverTriple tr = rt.dealer().triple(n, 1, OpTag::ReluSelect, /*charged=*/false);
  detail::claim(tr);
  const uint64_t sess = rt.new_session();
  SharePair out{{Party::Server, FixedTensor(x.shape(), cfg), sess}, {Party::Client, FixedTensor(x.shape(), cfg), sess}};
  beaver_batched(
      rt, detail::TripleView{tr}, OpTag::ReluSelect, [&](Party p, size_t g) { return b.of(p).payload.data[g]; },
      [&](Party p, size_t g, size_t) { return x.of(p).payload.data[g]; },
      [&](Party p, size_t g, size_t, uint64_t v) { out.of(p).payload.data[g] = v; });
  return out;
}

}  // namespace copriv

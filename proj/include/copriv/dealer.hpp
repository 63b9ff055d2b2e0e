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

// Trusted dealer standing in for OT-based helper-data generation. It hands
// out correlated randomness and answers comparison queries on masked values;
// its traffic is charged to the channel from the shared accounting rules.

#include <array>
#include <atomic>
#include <cstdint>
#include <random>
#include <vector>

#include "copriv/accounting.hpp"
#include "copriv/channel.hpp"
#include "copriv/errors.hpp"
#include "copriv/ring.hpp"

namespace copriv {

/// Materialized (batched) Beaver triple: per group one multiplier share a
/// and t co-operand shares b_i with c_i = a * b_i. t = 1 is the scalar case.
struct BeaverTriple {
  size_t groups = 0;
  size_t t = 1;
  std::array<std::vector<uint64_t>, 2> a, b, c;
  bool used = false;

  /// Calls f(g, a_p, b_p*, c_p*) for every group, in order.
  template <class F>
  void visit(Party p, F&& f) const {
    const auto& ap = a[idx(p)];
    const auto& bp = b[idx(p)];
    const auto& cp = c[idx(p)];
    for (size_t g = 0; g < groups; ++g) f(g, ap[g], bp.data() + g * t, cp.data() + g * t);
  }
};

/// Streamed batched triple. Values are regenerated from a seed on every
/// pass instead of being stored, which keeps large convolutions in memory.
/// Each party may walk the tape at most twice (openings, then products).
class TripleTape {
 public:
  TripleTape(uint64_t seed, size_t groups, size_t t, const RingConfig& cfg)
      : seed_(seed), groups_(groups), t_(t), cfg_(cfg) {}
  TripleTape(const TripleTape&) = delete;
  TripleTape& operator=(const TripleTape&) = delete;

  size_t groups() const { return groups_; }
  size_t t() const { return t_; }

  template <class F>
  void visit(Party p, F&& f) const {
    if (passes_[idx(p)].fetch_add(1) >= 2) throw ProtocolError("triple tape consumed more than once");
    std::mt19937_64 rng(seed_);
    const uint64_t mask = cfg_.mask();
    std::vector<uint64_t> bp(t_), cp(t_);
    for (size_t g = 0; g < groups_; ++g) {
      const uint64_t a_s = rng() & mask;
      const uint64_t a_c = rng() & mask;
      const uint64_t a = (a_s + a_c) & mask;
      for (size_t i = 0; i < t_; ++i) {
        const uint64_t b_s = rng() & mask;
        const uint64_t b_c = rng() & mask;
        const uint64_t c_s = rng() & mask;
        const uint64_t c_c = (a * ((b_s + b_c) & mask) - c_s) & mask;
        bp[i] = p == Party::Server ? b_s : b_c;
        cp[i] = p == Party::Server ? c_s : c_c;
      }
      f(g, p == Party::Server ? a_s : a_c, bp.data(), cp.data());
    }
  }

 private:
  uint64_t seed_;
  size_t groups_;
  size_t t_;
  RingConfig cfg_;
  mutable std::array<std::atomic<int>, 2> passes_{};
};

/// Additive shares of a random mask r, plus shares of r >> shift.
struct MaskShares {
  std::array<std::vector<uint64_t>, 2> r;
  std::array<std::vector<uint64_t>, 2> r_high;
  std::vector<uint64_t> r_clear;  // dealer-private
  int shift = 0;
};

class Dealer {
 public:
  Dealer(uint64_t seed, const RingConfig& cfg, Channel& ch, double k_ot)
      : rng_(seed), cfg_(cfg), ch_(ch), k_ot_(k_ot) {}

  const RingConfig& cfg() const { return cfg_; }

  /// Batched triple, materialized. Charges l(lambda + t l) bits per group.
  BeaverTriple triple(size_t groups, size_t t, OpTag tag, bool charged = true) {
    if (groups == 0 || t == 0) throw InputError("empty multiplication batch");
    BeaverTriple tr;
    tr.groups = groups;
    tr.t = t;
    const uint64_t mask = cfg_.mask();
    for (auto* v : {&tr.a, &tr.b, &tr.c}) {
      (*v)[0].resize(v == &tr.a ? groups : groups * t);
      (*v)[1].resize(v == &tr.a ? groups : groups * t);
    }
    for (size_t g = 0; g < groups; ++g) {
      tr.a[0][g] = rng_() & mask;
      tr.a[1][g] = rng_() & mask;
      const uint64_t a = (tr.a[0][g] + tr.a[1][g]) & mask;
      for (size_t i = 0; i < t; ++i) {
        const size_t j = g * t + i;
        tr.b[0][j] = rng_() & mask;
        tr.b[1][j] = rng_() & mask;
        tr.c[0][j] = rng_() & mask;
        tr.c[1][j] = (a * ((tr.b[0][j] + tr.b[1][j]) & mask) - tr.c[0][j]) & mask;
      }
    }
    if (charged) ch_.charge_preprocessing_bits(tag, helper_bits(groups, t, cfg_), k_ot_);
    return tr;
  }

  /// Same correlation as triple(), streamed. Same charge.
  TripleTape tape(size_t groups, size_t t, OpTag tag) {
    if (groups == 0 || t == 0) throw InputError("empty multiplication batch");
    ch_.charge_preprocessing_bits(tag, helper_bits(groups, t, cfg_), k_ot_);
    return TripleTape(rng_(), groups, t, cfg_);
  }

  /// Random masks for one opening. Their generation is part of the
  /// comparison sub-protocol, whose traffic is charged online.
  MaskShares masks(size_t n, int shift) {
    MaskShares m;
    m.shift = shift;
    const uint64_t mask = cfg_.mask();
    m.r_clear.resize(n);
    for (int p = 0; p < 2; ++p) {
      m.r[p].resize(n);
      m.r_high[p].resize(n);
    }
    for (size_t i = 0; i < n; ++i) {
      const uint64_t r = rng_() & mask;
      const uint64_t rs = rng_() & mask;
      const uint64_t hs = rng_() & mask;
      m.r_clear[i] = r;
      m.r[0][i] = rs;
      m.r[1][i] = (r - rs) & mask;
      m.r_high[0][i] = hs;
      m.r_high[1][i] = ((r >> shift) - hs) & mask;
    }
    return m;
  }

  /// Given the opened z = x' + r, shares of w * 2^(l-shift) - beta where
  /// w = [z < r] (the opening wrapped) and beta = [z mod 2^shift < r mod 2^shift]
  /// (the low bits borrowed). The dealer sees only masked values.
  std::array<std::vector<uint64_t>, 2> trunc_correction(const std::vector<uint64_t>& z, const MaskShares& m) {
    check_len(z, m);
    const uint64_t mask = cfg_.mask();
    const int k = m.shift;
    const uint64_t low = k == 0 ? 0 : (k >= 64 ? ~0ULL : ((1ULL << k) - 1));
    const uint64_t wrap = k == 0 ? 0 : (1ULL << (cfg_.l - k)) & mask;
    std::array<std::vector<uint64_t>, 2> out{std::vector<uint64_t>(z.size()), std::vector<uint64_t>(z.size())};
    for (size_t i = 0; i < z.size(); ++i) {
      const uint64_t r = m.r_clear[i];
      const uint64_t w = z[i] < r ? 1 : 0;
      const uint64_t beta = (z[i] & low) < (r & low) ? 1 : 0;
      const uint64_t corr = (w * wrap - beta) & mask;
      out[0][i] = rng_() & mask;
      out[1][i] = (corr - out[0][i]) & mask;
    }
    return out;
  }

  /// Shares of [x >= 0] given z = x + 2^(l-1) + r.
  std::array<std::vector<uint64_t>, 2> sign_bits(const std::vector<uint64_t>& z, const MaskShares& m) {
    check_len(z, m);
    const uint64_t mask = cfg_.mask();
    const uint64_t half = 1ULL << (cfg_.l - 1);
    std::array<std::vector<uint64_t>, 2> out{std::vector<uint64_t>(z.size()), std::vector<uint64_t>(z.size())};
    for (size_t i = 0; i < z.size(); ++i) {
      const uint64_t biased = (z[i] - m.r_clear[i]) & mask;
      const uint64_t bit = biased >= half ? 1 : 0;
      out[0][i] = rng_() & mask;
      out[1][i] = (bit - out[0][i]) & mask;
    }
    return out;
  }

 private:
  static void check_len(const std::vector<uint64_t>& z, const MaskShares& m) {
    if (z.size() != m.r_clear.size()) throw ProtocolError("opened vector does not match its masks");
  }

  std::mt19937_64 rng_;
  RingConfig cfg_;
  Channel& ch_;
  double k_ot_;
};

}  // namespace copriv

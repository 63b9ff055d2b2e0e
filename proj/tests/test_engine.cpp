// Copyright 2026 The CoPriv-Sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "copriv/engine.hpp"

using namespace copriv;

namespace {

RuntimeOptions opts(RingConfig cfg = {}, Schedule s = Schedule::Sequential, bool transcript = false) {
  RuntimeOptions o;
  o.cfg = cfg;
  o.schedule = s;
  o.transcript = transcript;
  o.seed = 99;
  return o;
}

FixedTensor fixed(std::vector<double> v, const RingConfig& cfg) {
  const int n = static_cast<int>(v.size());
  Tensor<double> t({1, 1, 1, n}, std::move(v));
  return FixedTensor::encode(t, cfg);
}

FixedTensor raw(std::vector<uint64_t> v, const RingConfig& cfg) {
  const int n = static_cast<int>(v.size());
  return FixedTensor({1, 1, 1, n}, std::move(v), cfg);
}

FixedTensor random_ring(size_t n, const RingConfig& cfg, std::mt19937_64& rng) {
  std::vector<uint64_t> v(n);
  for (auto& e : v) e = rng() & cfg.mask();
  return raw(std::move(v), cfg);
}

}  // namespace

TEST(Sharing, SmallRingExample) {
  RingConfig cfg{8, 0, 128};
  Share s{Party::Server, raw({250}, cfg), 1};
  Share c{Party::Client, raw({206}, cfg), 1};
  EXPECT_EQ(reconstruct(s, c).data[0], 200u);
  std::mt19937_64 rng(1);
  auto p = share(raw({200}, cfg), rng, 4);
  EXPECT_EQ((p.server.payload.data[0] + p.client.payload.data[0]) & 255, 200u);
}

TEST(Sharing, RoundTripRandom) {
  RingConfig cfg;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_ring(64, cfg, rng);
    EXPECT_EQ(reconstruct(share(x, rng, 3)), x);
  }
}

TEST(Sharing, SharesAreUniform) {
  // Chi-square over the 256 values of an 8-bit ring; both marginals.
  RingConfig cfg{8, 0, 128};
  std::mt19937_64 rng(5);
  const auto x = raw(std::vector<uint64_t>(1, 77), cfg);
  const int draws = 256 * 200;
  std::vector<int> hs(256), hc(256);
  for (int i = 0; i < draws; ++i) {
    const auto p = share(x, rng);
    ++hs[p.server.payload.data[0]];
    ++hc[p.client.payload.data[0]];
  }
  auto chi2 = [&](const std::vector<int>& h) {
    double s = 0;
    const double e = draws / 256.0;
    for (int v : h) s += (v - e) * (v - e) / e;
    return s;
  };
  // 255 dof; 99.9th percentile is about 330.
  EXPECT_LT(chi2(hs), 330.0);
  EXPECT_LT(chi2(hc), 330.0);
}

TEST(Sharing, ReconstructErrors) {
  RingConfig cfg;
  std::mt19937_64 rng(3);
  const auto a = share(random_ring(4, cfg, rng), rng, 1);
  const auto b = share(random_ring(5, cfg, rng), rng, 2);
  EXPECT_THROW(reconstruct(a.server, b.client), InputError);
  Share c = b.client;
  c.session = 1;
  EXPECT_THROW(reconstruct(a.server, c), InputError);
  EXPECT_THROW(reconstruct(a.server, a.server), InputError);
}

TEST(Engine, AddIsLocal) {
  Runtime rt(opts());
  std::mt19937_64 rng(4);
  const auto x = random_ring(10, rt.cfg(), rng);
  const auto y = random_ring(10, rt.cfg(), rng);
  const auto z = reconstruct(add(share(x, rng), share(y, rng)));
  for (size_t i = 0; i < 10; ++i) EXPECT_EQ(z.data[i], (x.data[i] + y.data[i]) & rt.cfg().mask());
  EXPECT_EQ(rt.channel().online_bytes(), 0u);
  EXPECT_EQ(rt.channel().preprocessing_total_bytes(), 0u);
}

TEST(Engine, MulSmallIntegers) {
  RingConfig cfg{41, 0, 128};
  Runtime rt(opts(cfg));
  std::mt19937_64 rng(6);
  const auto z = reconstruct(mul_shared(rt, share(raw({3, 0}, cfg), rng), share(raw({5, 12345}, cfg), rng)));
  EXPECT_EQ(z.data[0], 15u);
  EXPECT_EQ(z.data[1], 0u);
}

TEST(Engine, MulRandomFullRingAndBytes) {
  for (int l : {41, 64}) {
    RingConfig cfg{l, 0, 128};
    Runtime rt(opts(cfg));
    std::mt19937_64 rng(7);
    const size_t n = 1000;
    const auto x = random_ring(n, cfg, rng);
    const auto y = random_ring(n, cfg, rng);
    const auto z = reconstruct(mul_shared(rt, share(x, rng), share(y, rng)));
    for (size_t i = 0; i < n; ++i) ASSERT_EQ(z.data[i], (x.data[i] * y.data[i]) & cfg.mask());
    const uint64_t B = cfg.bytes_per_elem();
    EXPECT_EQ(rt.channel().online_bytes(), 2 * 2 * B * n);
    EXPECT_EQ(rt.channel().preprocessing_bits(), n * l * (128 + l));
    EXPECT_EQ(rt.channel().preprocessing_total_bytes(), (n * l * (128 + l) + 7) / 8);
    EXPECT_EQ(rt.channel().rounds(), 1u);
  }
}

TEST(Engine, TripleReuseIsAnError) {
  Runtime rt(opts());
  std::mt19937_64 rng(8);
  const auto x = share(random_ring(3, rt.cfg(), rng), rng);
  BeaverTriple tr = rt.dealer().triple(3, 1, OpTag::Mul);
  mul_shared(rt, x, x, tr);
  EXPECT_THROW(mul_shared(rt, x, x, tr), ProtocolError);
  BeaverTriple wrong = rt.dealer().triple(4, 1, OpTag::Mul);
  EXPECT_THROW(mul_shared(rt, x, x, wrong), ProtocolError);
}

TEST(Engine, DealerTriplesSatisfyInvariant) {
  Runtime rt(opts());
  const auto tr = rt.dealer().triple(20, 7, OpTag::BatchedMul);
  const uint64_t mask = rt.cfg().mask();
  for (size_t g = 0; g < 20; ++g) {
    const uint64_t a = (tr.a[0][g] + tr.a[1][g]) & mask;
    for (size_t i = 0; i < 7; ++i) {
      const size_t j = g * 7 + i;
      EXPECT_EQ((tr.c[0][j] + tr.c[1][j]) & mask, (a * ((tr.b[0][j] + tr.b[1][j]) & mask)) & mask);
    }
  }
}

TEST(Engine, TripleTapeMatchesInvariantAndLimitsPasses) {
  RingConfig cfg;
  TripleTape tape(1234, 5, 9, cfg);
  std::vector<uint64_t> a(5), b(45), c(45);
  for (Party p : kParties) {
    tape.visit(p, [&](size_t g, uint64_t ap, const uint64_t* bp, const uint64_t* cp) {
      a[g] += ap;
      for (size_t i = 0; i < 9; ++i) {
        b[g * 9 + i] += bp[i];
        c[g * 9 + i] += cp[i];
      }
    });
  }
  for (size_t j = 0; j < 45; ++j) EXPECT_EQ(c[j] & cfg.mask(), (a[j / 9] * b[j]) & cfg.mask());
  auto noop = [](size_t, uint64_t, const uint64_t*, const uint64_t*) {};
  tape.visit(Party::Server, noop);
  EXPECT_THROW(tape.visit(Party::Server, noop), ProtocolError);
}

TEST(Engine, BatchedMulCorrectAndCharged) {
  RingConfig cfg{41, 0, 128};
  Runtime rt(opts(cfg));
  std::mt19937_64 rng(9);
  const size_t G = 3, t = 256;
  const auto a = random_ring(G, cfg, rng);
  const auto b = random_ring(G * t, cfg, rng);
  const auto z = reconstruct(batched_mul(rt, share(a, rng), share(b, rng)));
  for (size_t g = 0; g < G; ++g)
    for (size_t i = 0; i < t; ++i) ASSERT_EQ(z.data[g * t + i], (a.data[g] * b.data[g * t + i]) & cfg.mask());
  EXPECT_EQ(rt.channel().preprocessing_bits(), G * 41 * (128 + t * 41));
  EXPECT_EQ(rt.channel().online_bytes(), 2 * (G + G * t) * 6);
}

TEST(Engine, BatchedMulGroupCostExample) {
  RingConfig cfg;
  EXPECT_EQ(helper_bits(1, 256, cfg), 435584u);  // 41 * (128 + 256 * 41)
  EXPECT_EQ(preprocessing_bytes(helper_bits(1, 256, cfg), 1.0), 54448u);
  EXPECT_EQ(preprocessing_bytes(helper_bits(1, 255, cfg), 1.0), 54238u);  // 54237.875 rounds up
  EXPECT_EQ(helper_bits(1, 1, cfg), 41u * (128 + 41));
}

TEST(Engine, BatchedMulEmpty) {
  Runtime rt(opts());
  EXPECT_THROW(rt.dealer().triple(0, 4, OpTag::BatchedMul), InputError);
  EXPECT_THROW(rt.dealer().tape(3, 0, OpTag::BatchedMul), InputError);
}

TEST(Engine, BatchSaving) {
  RingConfig cfg;
  double prev = 1e300;
  for (uint64_t t = 2; t <= 1024; ++t) {
    EXPECT_LT(helper_bits(1, t, cfg), t * helper_bits(1, 1, cfg));
    const double per = static_cast<double>(helper_bits(1, t, cfg)) / static_cast<double>(t);
    EXPECT_LT(per, prev);
    prev = per;
  }
}

TEST(Engine, TruncateExactProduct) {
  RingConfig cfg;
  Runtime rt(opts(cfg));
  std::mt19937_64 rng(10);
  const auto prod = mul_shared(rt, share(fixed({1.5, 0.0, -1.5}, cfg), rng), share(fixed({2.0, 7.0, 2.0}, cfg), rng));
  const auto y = reconstruct(truncate(rt, prod, cfg.scale));
  EXPECT_EQ(y.data[0], encode(3.0, cfg).value);
  EXPECT_EQ(y.data[1], 0u);
  EXPECT_EQ(y.data[2], encode(-3.0, cfg).value);
}

TEST(Engine, TruncateRandomPairs) {
  RingConfig cfg;
  Runtime rt(opts(cfg));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-100, 100);
  const size_t n = 1000;
  std::vector<double> xs(n), ys(n);
  for (size_t i = 0; i < n; ++i) {
    xs[i] = quantize(u(rng), cfg);
    ys[i] = quantize(u(rng), cfg);
  }
  const auto before = rt.channel().online_bytes();
  const auto prod = mul_shared(rt, share(fixed(xs, cfg), rng), share(fixed(ys, cfg), rng));
  const auto mid = rt.channel().online_bytes();
  const auto y = reconstruct(truncate(rt, prod, cfg.scale)).decode();
  const auto p = reconstruct(prod);
  for (size_t i = 0; i < n; ++i) {
    ASSERT_LE(std::fabs(y[i] - xs[i] * ys[i]), std::ldexp(1.0, -cfg.scale));
    // Exact floor semantics against the product itself.
    ASSERT_EQ(encode(y[i], cfg).value, ring::arith_shift(p.data[i], cfg.scale, cfg));
  }
  EXPECT_GT(mid, before);
  EXPECT_EQ(rt.channel().online_bytes() - mid, static_cast<uint64_t>(4 * 6 * n));
}

TEST(Engine, TruncateExtremesAndErrors) {
  for (int l : {8, 41, 64}) {
    RingConfig cfg{l, 0, 128};
    Runtime rt(opts(cfg));
    std::mt19937_64 rng(12);
    const auto x = random_ring(500, cfg, rng);
    for (int k : {1, l / 2, l - 1}) {
      const auto y = reconstruct(truncate(rt, share(x, rng), k));
      for (size_t i = 0; i < x.size(); ++i) ASSERT_EQ(y.data[i], ring::arith_shift(x.data[i], k, cfg)) << l << " " << k;
    }
    EXPECT_THROW(truncate(rt, share(x, rng), l), InputError);
  }
}

TEST(Engine, ReluCases) {
  RingConfig cfg;
  Runtime rt(opts(cfg));
  std::mt19937_64 rng(13);
  const auto y = reconstruct(relu_shared(rt, share(fixed({-2.5, 3.0, 0.0}, cfg), rng)));
  EXPECT_EQ(y.data[0], 0u);
  EXPECT_EQ(y.data[1], encode(3.0, cfg).value);
  EXPECT_EQ(y.data[2], 0u);
}

TEST(Engine, ReluRandomAndBytes) {
  for (int l : {16, 41, 64}) {
    RingConfig cfg{l, 0, 128};
    Runtime rt(opts(cfg));
    std::mt19937_64 rng(14);
    const size_t n = 777;
    const auto x = random_ring(n, cfg, rng);
    const auto y = reconstruct(relu_shared(rt, share(x, rng)));
    for (size_t i = 0; i < n; ++i) {
      const int64_t s = ring::to_signed(x.data[i], cfg);
      ASSERT_EQ(y.data[i], s > 0 ? x.data[i] : 0u);
    }
    EXPECT_EQ(rt.channel().online_bytes(), static_cast<uint64_t>(8 * cfg.bytes_per_elem() * n));
    EXPECT_EQ(rt.channel().preprocessing_total_bytes(), 0u);
  }
}

TEST(Engine, OnlineConstantsAreCharged) {
  RuntimeOptions o = opts();
  o.constants.c_relu = 10.5;
  o.constants.c_trunc = 3.25;
  Runtime rt(o);
  std::mt19937_64 rng(15);
  const auto x = share(random_ring(101, rt.cfg(), rng), rng);
  relu_shared(rt, x);
  EXPECT_EQ(rt.channel().online_bytes(), elementwise_online_bytes(101, 10.5, rt.cfg()));
  const auto before = rt.channel().online_bytes();
  truncate(rt, x, 12);
  EXPECT_EQ(rt.channel().online_bytes() - before, elementwise_online_bytes(101, 3.25, rt.cfg()));
}

TEST(Engine, ConstantsBelowWireTrafficRejected) {
  RuntimeOptions o = opts();
  o.constants.c_relu = 5;
  EXPECT_THROW(Runtime{o}, InputError);
  o.constants.c_relu = 8;
  o.constants.c_trunc = 1;
  EXPECT_THROW(Runtime{o}, InputError);
  o.constants.c_trunc = 4;
  o.constants.k_ot = 0;
  EXPECT_THROW(Runtime{o}, InputError);
}

TEST(Engine, PhaseAttribution) {
  Runtime rt(opts());
  rt.dealer().triple(10, 4, OpTag::BatchedMul);
  EXPECT_EQ(rt.channel().online_bytes(), 0u);
  EXPECT_GT(rt.channel().preprocessing_total_bytes(), 0u);

  Runtime rt2(opts());
  std::mt19937_64 rng(16);
  const auto x = share(random_ring(10, rt2.cfg(), rng), rng);
  relu_shared(rt2, truncate(rt2, x, 3));
  EXPECT_GT(rt2.channel().online_bytes(), 0u);
  EXPECT_EQ(rt2.channel().preprocessing_total_bytes(), 0u);
}

namespace {

struct RunResult {
  FixedTensor out;
  std::vector<TranscriptRecord> transcript;
  uint64_t online, pre;
};

RunResult pipeline(Schedule s) {
  RuntimeOptions o = opts({}, s, true);
  Runtime rt(o);
  std::mt19937_64 rng(17);
  const auto x = share(random_ring(200, rt.cfg(), rng), rng);
  const auto y = share(random_ring(200, rt.cfg(), rng), rng);
  auto z = relu_shared(rt, truncate(rt, mul_shared(rt, x, y), 12));
  z = batched_mul(rt, share(random_ring(4, rt.cfg(), rng), rng), z);
  return {reconstruct(z), rt.channel().transcript(), rt.channel().online_bytes(), rt.channel().preprocessing_total_bytes()};
}

}  // namespace

TEST(Engine, ThreadedMatchesSequential) {
  const auto a = pipeline(Schedule::Sequential);
  const auto b = pipeline(Schedule::Threaded);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.transcript, b.transcript);
  EXPECT_EQ(a.online, b.online);
  EXPECT_EQ(a.pre, b.pre);
}

TEST(Engine, ThreadedErrorDoesNotDeadlock) {
  Runtime rt(opts({}, Schedule::Threaded));
  EXPECT_THROW(rt.exchange(
                   Phase::Online, OpTag::Mul,
                   [](Party p) -> std::vector<uint64_t> {
                     if (p == Party::Client) throw ProtocolError("boom");
                     return {1};
                   },
                   [](Party, const std::vector<uint64_t>&, const std::vector<uint64_t>&) {}),
               ProtocolError);
}

TEST(Transcript, RoundTripAndTotals) {
  const auto run = pipeline(Schedule::Sequential);
  const auto path = (std::filesystem::temp_directory_path() / "copriv_engine_transcript.bin").string();
  write_transcript(path, {41, 1.0}, run.transcript);
  const auto [h, recs] = read_transcript(path);
  EXPECT_EQ(h.l, 41);
  EXPECT_EQ(recs, run.transcript);
  const auto tot = transcript_totals(h, recs);
  EXPECT_EQ(tot.online_bytes, run.online);
  EXPECT_EQ(tot.preprocessing_bytes, run.pre);
  std::remove(path.c_str());
}

TEST(Transcript, RejectsGarbage) {
  const auto path = (std::filesystem::temp_directory_path() / "copriv_engine_garbage.bin").string();
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  EXPECT_THROW(read_transcript(path), InputError);
  EXPECT_THROW(read_transcript(path + ".missing"), InputError);
  std::remove(path.c_str());
}

TEST(Wire, PackUnpack) {
  RingConfig cfg;
  std::vector<uint64_t> v{0, 1, cfg.mask(), 123456789};
  const auto bytes = pack_elems(v, cfg);
  EXPECT_EQ(bytes.size(), 24u);
  EXPECT_EQ(unpack_elems(bytes, cfg), v);
  std::vector<uint8_t> bad(5);
  EXPECT_THROW(unpack_elems(bad, cfg), ProtocolError);
}

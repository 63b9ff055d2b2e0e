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
#include <array>
#include <atomic>
#include <bit>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "copriv/accounting.hpp"
#include "copriv/errors.hpp"
#include "copriv/ring.hpp"

namespace copriv {

enum class Party : uint8_t { Server = 0, Client = 1 };

constexpr Party other(Party p) noexcept { return p == Party::Server ? Party::Client : Party::Server; }
constexpr size_t idx(Party p) noexcept { return static_cast<size_t>(p); }
inline constexpr std::array<Party, 2> kParties{Party::Server, Party::Client};

inline const char* party_name(Party p) { return p == Party::Server ? "server" : "client"; }

enum class Phase : uint8_t { Preprocessing = 0, Online = 1 };

inline const char* phase_name(Phase p) { return p == Phase::Preprocessing ? "preprocessing" : "online"; }

/// Which protocol step produced a message; carried in the transcript.
enum class OpTag : uint8_t {
  Mul = 0,
  BatchedMul = 1,
  ConvRegular = 2,
  ConvEwmm = 3,
  ConvGemm = 4,
  TruncOpen = 5,
  TruncCompare = 6,
  ReluOpen = 7,
  ReluCompare = 8,
  ReluSelect = 9,
};

inline const char* tag_name(OpTag t) {
  switch (t) {
    case OpTag::Mul: return "mul";
    case OpTag::BatchedMul: return "batched_mul";
    case OpTag::ConvRegular: return "conv_regular";
    case OpTag::ConvEwmm: return "conv_ewmm";
    case OpTag::ConvGemm: return "conv_gemm";
    case OpTag::TruncOpen: return "trunc_open";
    case OpTag::TruncCompare: return "trunc_compare";
    case OpTag::ReluOpen: return "relu_open";
    case OpTag::ReluCompare: return "relu_compare";
    case OpTag::ReluSelect: return "relu_select";
  }
  return "unknown";
}

/// One transcript entry. Real messages carry their payload. Synthetic
/// entries account for traffic the simulator charges without producing
/// bytes: comparison sub-protocols (length in bytes) and helper-data
/// generation (length in bits, always pre-processing).
struct TranscriptRecord {
  Phase phase = Phase::Online;
  OpTag tag = OpTag::Mul;
  Party from = Party::Server;
  bool synthetic = false;
  bool length_in_bits = false;
  uint32_t round = 0;
  uint64_t length = 0;
  std::vector<uint8_t> payload;

  friend bool operator==(const TranscriptRecord&, const TranscriptRecord&) = default;
};

struct TranscriptHeader {
  int l = 41;
  double k_ot = 1.0;
};

/// Totals recomputed from a transcript alone.
struct TranscriptTotals {
  uint64_t online_bytes = 0;
  uint64_t preprocessing_bytes = 0;
  uint64_t records = 0;
};

/// Pack ring elements as fixed-width little-endian words.
inline std::vector<uint8_t> pack_elems(std::span<const uint64_t> v, const RingConfig& cfg) {
  const int w = cfg.bytes_per_elem();
  std::vector<uint8_t> out(v.size() * static_cast<size_t>(w));
  uint8_t* p = out.data();
  for (uint64_t x : v) {
    x &= cfg.mask();
    for (int b = 0; b < w; ++b) *p++ = static_cast<uint8_t>(x >> (8 * b));
  }
  return out;
}

inline std::vector<uint64_t> unpack_elems(std::span<const uint8_t> bytes, const RingConfig& cfg) {
  const int w = cfg.bytes_per_elem();
  if (bytes.size() % static_cast<size_t>(w) != 0) throw ProtocolError("message length is not a whole number of ring elements");
  std::vector<uint64_t> out(bytes.size() / static_cast<size_t>(w));
  const uint8_t* p = bytes.data();
  for (auto& x : out) {
    uint64_t v = 0;
    for (int b = 0; b < w; ++b) v |= static_cast<uint64_t>(*p++) << (8 * b);
    x = v & cfg.mask();
  }
  return out;
}

/// Duplex channel between server and client with per-direction, per-phase
/// metering. Each direction is written by exactly one party and read by the
/// other; it is safe to drive the two ends from two threads.
class Channel {
 public:
  explicit Channel(bool keep_transcript = false) : keep_transcript_(keep_transcript) {}
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  void send(Party from, Phase phase, OpTag tag, uint32_t round, std::vector<uint8_t> payload) {
    Stream& s = streams_[idx(from)];
    counters_[idx(from)][static_cast<size_t>(phase)].fetch_add(payload.size(), std::memory_order_relaxed);
    if (keep_transcript_) {
      TranscriptRecord rec{phase, tag, from, false, false, round, payload.size(), payload};
      s.log.push_back(std::move(rec));
    }
    {
      std::lock_guard lk(s.m);
      s.q.push_back(std::move(payload));
    }
    s.cv.notify_one();
  }

  /// Blocks until the peer's next message arrives.
  std::vector<uint8_t> recv(Party to) {
    Stream& s = streams_[idx(other(to))];
    std::unique_lock lk(s.m);
    s.cv.wait(lk, [&] { return !s.q.empty() || aborted_.load(); });
    if (s.q.empty()) throw ProtocolError("channel aborted while waiting for a message");
    auto msg = std::move(s.q.front());
    s.q.pop_front();
    return msg;
  }

  /// Account traffic of a sub-protocol the simulator does not run on the wire.
  void charge(Party from, Phase phase, OpTag tag, uint32_t round, uint64_t bytes) {
    if (bytes == 0) return;
    counters_[idx(from)][static_cast<size_t>(phase)].fetch_add(bytes, std::memory_order_relaxed);
    if (keep_transcript_) streams_[idx(from)].log.push_back({phase, tag, from, true, false, round, bytes, {}});
  }

  /// Helper-data generation, charged in bits (formulas may produce
  /// fractional bytes) and rounded up to bytes per call. Called from the
  /// coordinating context only.
  void charge_preprocessing_bits(OpTag tag, uint64_t bits, double k_ot) {
    preprocessing_bits_ += bits;
    preprocessing_bytes_ += preprocessing_bytes(bits, k_ot);
    if (keep_transcript_) {
      dealer_log_.push_back({Phase::Preprocessing, tag, Party::Server, true, true, rounds_.load(), bits, {}});
    }
  }

  uint32_t begin_round() { return rounds_.fetch_add(1); }

  void abort() {
    aborted_ = true;
    for (auto& s : streams_) {
      std::lock_guard lk(s.m);
      s.cv.notify_all();
    }
  }

  uint64_t bytes_sent(Party from, Phase phase) const {
    return counters_[idx(from)][static_cast<size_t>(phase)].load();
  }
  uint64_t online_bytes() const { return bytes_sent(Party::Server, Phase::Online) + bytes_sent(Party::Client, Phase::Online); }
  uint64_t wire_preprocessing_bytes() const {
    return bytes_sent(Party::Server, Phase::Preprocessing) + bytes_sent(Party::Client, Phase::Preprocessing);
  }
  uint64_t preprocessing_bits() const { return preprocessing_bits_; }
  /// Modeled helper-data bytes plus any real pre-processing messages.
  uint64_t preprocessing_total_bytes() const { return preprocessing_bytes_ + wire_preprocessing_bytes(); }
  uint32_t rounds() const { return rounds_.load(); }
  bool keeps_transcript() const { return keep_transcript_; }

  /// Deterministic merge: by round, dealer charges first, then server, then
  /// client, each in send order.
  std::vector<TranscriptRecord> transcript() const {
    std::vector<std::tuple<uint32_t, int, size_t, const TranscriptRecord*>> keyed;
    for (size_t i = 0; i < dealer_log_.size(); ++i) keyed.emplace_back(dealer_log_[i].round, 0, i, &dealer_log_[i]);
    for (Party p : kParties) {
      const auto& log = streams_[idx(p)].log;
      for (size_t i = 0; i < log.size(); ++i) keyed.emplace_back(log[i].round, 1 + static_cast<int>(idx(p)), i, &log[i]);
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) < std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
    });
    std::vector<TranscriptRecord> out;
    out.reserve(keyed.size());
    for (const auto& k : keyed) out.push_back(*std::get<3>(k));
    return out;
  }

 private:
  struct Stream {
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::vector<uint8_t>> q;
    std::vector<TranscriptRecord> log;  // touched only by the sending party
  };

  bool keep_transcript_;
  std::array<Stream, 2> streams_;
  std::array<std::array<std::atomic<uint64_t>, 2>, 2> counters_{};
  uint64_t preprocessing_bits_ = 0;
  uint64_t preprocessing_bytes_ = 0;
  std::vector<TranscriptRecord> dealer_log_;
  std::atomic<uint32_t> rounds_{0};
  std::atomic<bool> aborted_{false};
};

// Transcript file: "CPTR", u32 version, u32 l, f64 k_ot, u64 record count,
// then per record: u8 phase, u8 tag, u8 from, u8 flags, u32 round,
// u64 length, payload (real messages only). Little-endian throughout.

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  uint8_t buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw InputError("truncated transcript file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_transcript(const std::string& path, const TranscriptHeader& h,
                             const std::vector<TranscriptRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open transcript for writing: " + path);
  os.write("CPTR", 4);
  detail::put_le<uint32_t>(os, 1);
  detail::put_le<uint32_t>(os, static_cast<uint32_t>(h.l));
  detail::put_le<double>(os, h.k_ot);
  detail::put_le<uint64_t>(os, records.size());
  for (const auto& r : records) {
    detail::put_le<uint8_t>(os, static_cast<uint8_t>(r.phase));
    detail::put_le<uint8_t>(os, static_cast<uint8_t>(r.tag));
    detail::put_le<uint8_t>(os, static_cast<uint8_t>(r.from));
    detail::put_le<uint8_t>(os, static_cast<uint8_t>((r.synthetic ? 1 : 0) | (r.length_in_bits ? 2 : 0)));
    detail::put_le<uint32_t>(os, r.round);
    detail::put_le<uint64_t>(os, r.length);
    if (!r.synthetic) os.write(reinterpret_cast<const char*>(r.payload.data()), static_cast<std::streamsize>(r.payload.size()));
  }
  if (!os) throw InputError("failed writing transcript: " + path);
}

inline std::pair<TranscriptHeader, std::vector<TranscriptRecord>> read_transcript(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open transcript: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CPTR", 4) != 0) throw InputError("not a transcript file: " + path);
  if (detail::get_le<uint32_t>(is) != 1) throw InputError("unsupported transcript version");
  TranscriptHeader h;
  h.l = static_cast<int>(detail::get_le<uint32_t>(is));
  h.k_ot = detail::get_le<double>(is);
  const uint64_t count = detail::get_le<uint64_t>(is);
  std::vector<TranscriptRecord> recs;
  recs.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    TranscriptRecord r;
    r.phase = static_cast<Phase>(detail::get_le<uint8_t>(is));
    r.tag = static_cast<OpTag>(detail::get_le<uint8_t>(is));
    r.from = static_cast<Party>(detail::get_le<uint8_t>(is));
    const auto flags = detail::get_le<uint8_t>(is);
    r.synthetic = flags & 1;
    r.length_in_bits = flags & 2;
    r.round = detail::get_le<uint32_t>(is);
    r.length = detail::get_le<uint64_t>(is);
    if (!r.synthetic) {
      r.payload.resize(r.length);
      if (!is.read(reinterpret_cast<char*>(r.payload.data()), static_cast<std::streamsize>(r.length))) {
        throw InputError("truncated transcript payload");
      }
    }
    recs.push_back(std::move(r));
  }
  return {h, std::move(recs)};
}

/// Replay the accounting of a transcript. Helper-data records are rounded
/// to bytes one record at a time, matching how reports round per layer.
inline TranscriptTotals transcript_totals(const TranscriptHeader& h, const std::vector<TranscriptRecord>& recs) {
  TranscriptTotals t;
  for (const auto& r : recs) {
    ++t.records;
    if (r.length_in_bits) {
      t.preprocessing_bytes += preprocessing_bytes(r.length, h.k_ot);
    } else if (r.phase == Phase::Online) {
      t.online_bytes += r.length;
    } else {
      t.preprocessing_bytes += r.length;
    }
  }
  return t;
}

}  // namespace copriv

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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "copriv/errors.hpp"

namespace copriv {

/// Parameters of the ring Z_{2^l} together with the fixed-point convention
/// layered on top of it.
///
/// `l` is the ring bit-width, `scale` the number of fractional bits and
/// `lambda` the security parameter that enters the helper-data cost model.
struct RingConfig {
  int l = 41;
  int scale = 12;
  int lambda = 128;

  void validate() const {
    if (l < 2 || l > 64) {
      throw InputError("ring bit-width l must be in [2, 64], got " + std::to_string(l));
    }
    if (scale < 0 || scale >= l) {
      throw InputError("scale must be in [0, l), got " + std::to_string(scale));
    }
    if (lambda <= 0) {
      throw InputError("lambda must be positive, got " + std::to_string(lambda));
    }
  }

  constexpr uint64_t mask() const noexcept {
    return l == 64 ? ~uint64_t{0} : ((uint64_t{1} << l) - 1);
  }

  /// Serialized width of one ring element on the wire.
  constexpr int bytes_per_elem() const noexcept { return (l + 7) / 8; }

  friend bool operator==(const RingConfig&, const RingConfig&) = default;
};

/// An element of Z_{2^l}; the stored value is always reduced.
struct RingElem {
  uint64_t value = 0;

  friend bool operator==(const RingElem&, const RingElem&) = default;
};

namespace ring {

constexpr uint64_t reduce(uint64_t v, const RingConfig& cfg) noexcept { return v & cfg.mask(); }

constexpr uint64_t add(uint64_t a, uint64_t b, const RingConfig& cfg) noexcept {
  return (a + b) & cfg.mask();
}

constexpr uint64_t sub(uint64_t a, uint64_t b, const RingConfig& cfg) noexcept {
  return (a - b) & cfg.mask();
}

constexpr uint64_t mul(uint64_t a, uint64_t b, const RingConfig& cfg) noexcept {
  return (a * b) & cfg.mask();
}

constexpr uint64_t neg(uint64_t a, const RingConfig& cfg) noexcept { return (~a + 1) & cfg.mask(); }

/// Two's-complement reading: the upper half of the ring maps to negatives.
constexpr int64_t to_signed(uint64_t v, const RingConfig& cfg) noexcept {
  v &= cfg.mask();
  if (cfg.l == 64) return static_cast<int64_t>(v);
  const uint64_t half = uint64_t{1} << (cfg.l - 1);
  if (v >= half) return static_cast<int64_t>(v) - static_cast<int64_t>(uint64_t{1} << cfg.l);
  return static_cast<int64_t>(v);
}

constexpr uint64_t from_signed(int64_t v, const RingConfig& cfg) noexcept {
  return static_cast<uint64_t>(v) & cfg.mask();
}

/// floor(v / 2^shift) on the signed reading of v.
constexpr uint64_t arith_shift(uint64_t v, int shift, const RingConfig& cfg) noexcept {
  return from_signed(to_signed(v, cfg) >> shift, cfg);
}

}  // namespace ring

inline RingElem ring_add(RingElem a, RingElem b, const RingConfig& cfg) {
  return {ring::add(a.value, b.value, cfg)};
}

inline RingElem ring_sub(RingElem a, RingElem b, const RingConfig& cfg) {
  return {ring::sub(a.value, b.value, cfg)};
}

inline RingElem ring_mul(RingElem a, RingElem b, const RingConfig& cfg) {
  return {ring::mul(a.value, b.value, cfg)};
}

/// Largest magnitude (exclusive) that `encode` accepts at the given scale.
inline double encode_limit(const RingConfig& cfg, int scale) {
  return std::ldexp(1.0, cfg.l - scale - 1);
}

/// round(x * 2^scale) embedded in the ring; negatives wrap to the upper half.
inline RingElem encode_at(double x, const RingConfig& cfg, int scale) {
  if (!std::isfinite(x) || std::fabs(x) >= encode_limit(cfg, scale)) {
    throw OverflowError("value " + std::to_string(x) + " does not fit l=" + std::to_string(cfg.l) +
                        " with " + std::to_string(scale) + " fractional bits");
  }
  const double scaled = std::nearbyint(std::ldexp(x, scale));
  return {ring::from_signed(static_cast<int64_t>(scaled), cfg)};
}

inline RingElem encode(double x, const RingConfig& cfg) { return encode_at(x, cfg, cfg.scale); }

inline double decode_at(RingElem e, const RingConfig& cfg, int scale) {
  return std::ldexp(static_cast<double>(ring::to_signed(e.value, cfg)), -scale);
}

inline double decode(RingElem e, const RingConfig& cfg) { return decode_at(e, cfg, cfg.scale); }

/// Snap a real value onto the fixed-point grid of `cfg`.
inline double quantize(double x, const RingConfig& cfg) { return decode(encode(x, cfg), cfg); }

}  // namespace copriv

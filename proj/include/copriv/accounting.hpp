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

// Byte-accounting rules shared by the protocol engine (which charges them)
// and the cost model (which predicts them). Keeping one definition is what
// makes measured and modeled pre-processing bytes agree exactly.

#include <cmath>
#include <cstdint>
#include <string>

#include "copriv/errors.hpp"
#include "copriv/ring.hpp"

namespace copriv {

/// Calibratable constants for costs the simulator does not derive from
/// first principles. `k_ot` scales helper-data generation; `c_relu` and
/// `c_trunc` are online ring elements moved per ReLU / truncation.
struct CostConstants {
  double k_ot = 1.0;
  double c_relu = 8.0;
  double c_trunc = 4.0;

  void validate() const {
    if (!(k_ot > 0) || !(c_relu > 0) || !(c_trunc > 0) || !std::isfinite(k_ot) || !std::isfinite(c_relu) ||
        !std::isfinite(c_trunc)) {
      throw InputError("cost constants must be finite and positive");
    }
  }

  friend bool operator==(const CostConstants&, const CostConstants&) = default;
};

/// Real ring elements on the wire per truncated element (masked opening,
/// one element in each direction). The rest of c_trunc is comparison traffic.
inline constexpr int kTruncWireElems = 2;
/// Masked opening (2) plus the multiplexer's Beaver opening (4).
inline constexpr int kReluWireElems = 6;

/// Helper-data bits for `groups` batched multiplications that each reuse one
/// multiplier across `t` co-operands: l * (lambda + t * l) per group. t = 1
/// is a plain Beaver multiplication, l * (lambda + l).
inline uint64_t helper_bits(uint64_t groups, uint64_t t, const RingConfig& cfg) {
  const uint64_t l = static_cast<uint64_t>(cfg.l);
  return groups * l * (static_cast<uint64_t>(cfg.lambda) + t * l);
}

/// Bits -> bytes with the k_ot multiplier; fractional bytes round up.
inline uint64_t preprocessing_bytes(uint64_t bits, double k_ot) {
  return static_cast<uint64_t>(std::ceil(k_ot * static_cast<double>(bits) / 8.0 - 1e-9));
}

/// Online bytes charged for `elems` element-wise ops costing `c` ring
/// elements each.
inline uint64_t elementwise_online_bytes(uint64_t elems, double c, const RingConfig& cfg) {
  return static_cast<uint64_t>(std::ceil(c * static_cast<double>(cfg.bytes_per_elem()) * static_cast<double>(elems) - 1e-9));
}

/// Wire bytes of one batched-Beaver exchange: every party opens one masked
/// multiplier per group and one masked co-operand per product.
inline uint64_t beaver_online_bytes(uint64_t groups, uint64_t t, const RingConfig& cfg) {
  return 2 * (groups + groups * t) * static_cast<uint64_t>(cfg.bytes_per_elem());
}

}  // namespace copriv

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

#include <stdexcept>
#include <string>

namespace copriv {

/// Malformed input: bad dimensions, schema violations, unsupported
/// parameter combinations. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fixed-point value does not fit the ring.
class OverflowError : public InputError {
 public:
  using InputError::InputError;
};

/// Requested Winograd (m, r, stride) combination is not implemented.
class UnsupportedVariant : public InputError {
 public:
  using InputError::InputError;
};

/// Misuse of the two-party runtime (triple reuse, session mismatch, ...).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A guard refused to run a workload that is too large. Exit code 3.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace copriv

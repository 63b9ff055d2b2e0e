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

// Umbrella header.

#include "copriv/accounting.hpp"
#include "copriv/channel.hpp"
#include "copriv/commands.hpp"
#include "copriv/conv_protocols.hpp"
#include "copriv/cost_model.hpp"
#include "copriv/dealer.hpp"
#include "copriv/engine.hpp"
#include "copriv/errors.hpp"
#include "copriv/inference.hpp"
#include "copriv/netspec.hpp"
#include "copriv/prune_planner.hpp"
#include "copriv/reparam.hpp"
#include "copriv/report.hpp"
#include "copriv/ring.hpp"
#include "copriv/tensor.hpp"
#include "copriv/winograd.hpp"

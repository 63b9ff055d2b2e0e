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

// Communication-aware ReLU pruning: per-block deltas, budgeted selection,
// and the rewrite that merges the blocks whose ReLUs were dropped.
// Candidates are the inverted residual blocks; a network without any uses
// its ReLU sites (conv layers with alpha set) instead.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copriv/cost_model.hpp"
#include "copriv/errors.hpp"
#include "copriv/netspec.hpp"
#include "copriv/reparam.hpp"

namespace copriv {

/// Layer indices that carry an alpha gate, in network order.
inline std::vector<int> prune_candidates(const NetworkSpec& net) {
  std::vector<int> out = net.inverted_residuals();
  if (!out.empty()) return out;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.is_conv() && l.kind != LayerKind::FC && l.alpha) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// Modeled bytes of layer i with its ReLUs kept minus the bytes with them
/// dropped. An inverted residual block without ReLUs is merged into one
/// dense conv, which is what makes it Winograd-eligible.
inline double comm_delta(const NetworkSpec& net, size_t i, NetworkPolicy policy = NetworkPolicy::WinogradAuto,
                         const RingConfig& cfg = {}, const CostConstants& k = {}) {
  if (i >= net.layers.size()) throw InputError("layer index " + std::to_string(i) + " out of range");
  NetworkSpec on = net;
  NetworkSpec off = net;
  LayerSpec& l = on.layers[i];
  if (l.kind == LayerKind::InvertedResidual) {
    l.alpha = true;
    off.layers[i] = merged_layer(l);
  } else if (l.is_conv() && l.kind != LayerKind::FC) {
    l.alpha = true;
    off.layers[i].alpha = false;
  } else {
    throw InputError("layer " + std::to_string(i) + " '" + l.name + "' is not a prunable block");
  }
  return static_cast<double>(layer_total(on, i, policy, cfg, k)) - static_cast<double>(layer_total(off, i, policy, cfg, k));
}

/// Keep (alpha = 1) or drop, one entry per prune candidate.
struct AlphaPlan {
  std::vector<int> layers;   // candidate layer indices
  std::vector<int> alpha;    // 0 or 1 per candidate
  std::vector<double> delta; // bytes per candidate
  double mu = 0.0;
  int budget = 0;

  int kept() const { return std::accumulate(alpha.begin(), alpha.end(), 0); }
};

/// Keep the s candidates with the largest score - mu * delta; ties go to
/// the lower candidate index.
inline std::vector<int> select_top(const std::vector<double>& scores, const std::vector<double>& delta, int s,
                                   double mu) {
  const int n = static_cast<int>(scores.size());
  if (delta.size() != scores.size()) throw InputError("scores and deltas differ in length");
  if (s < 0 || s > n) throw InputError("budget " + std::to_string(s) + " outside [0, " + std::to_string(n) + "]");
  if (!std::isfinite(mu)) throw InputError("mu must be finite");
  std::vector<double> v(static_cast<size_t>(n));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("score " + std::to_string(i) + " is not finite");
    v[i] = scores[i] - mu * delta[i];
  }
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[static_cast<size_t>(a)] > v[static_cast<size_t>(b)]; });
  std::vector<int> alpha(static_cast<size_t>(n), 0);
  for (int j = 0; j < s; ++j) alpha[static_cast<size_t>(order[static_cast<size_t>(j)])] = 1;
  return alpha;
}

inline AlphaPlan plan(const NetworkSpec& net, const std::vector<double>& scores, int s, double mu,
                      NetworkPolicy policy = NetworkPolicy::WinogradAuto, const RingConfig& cfg = {},
                      const CostConstants& k = {}) {
  AlphaPlan p;
  p.layers = prune_candidates(net);
  if (scores.size() != p.layers.size())
    throw InputError("got " + std::to_string(scores.size()) + " scores for " + std::to_string(p.layers.size()) +
                     " blocks");
  for (int i : p.layers) p.delta.push_back(comm_delta(net, static_cast<size_t>(i), policy, cfg, k));
  p.alpha = select_top(scores, p.delta, s, mu);
  p.mu = mu;
  p.budget = s;
  return p;
}

/// Rewrite the network: dropped inverted residual blocks become dense
/// convs, dropped ReLU sites lose their ReLU. Weights, when given, are
/// merged alongside; dropped blocks must then be linear already or are
/// linearized here (their ReLUs are the thing being removed).
inline NetworkSpec apply_plan(const NetworkSpec& net, const AlphaPlan& p, NetworkWeights* weights = nullptr) {
  if (p.alpha.size() != p.layers.size()) throw InputError("plan has mismatched alpha and layer lists");
  if (weights && weights->size() != net.layers.size()) throw InputError("weights do not match the network");
  NetworkSpec out = net;
  for (size_t j = 0; j < p.layers.size(); ++j) {
    const size_t i = static_cast<size_t>(p.layers[j]);
    if (i >= out.layers.size()) throw InputError("plan names layer " + std::to_string(i) + " out of range");
    LayerSpec& l = out.layers[i];
    if (p.alpha[j] != 0 && p.alpha[j] != 1) throw InputError("alpha must be 0 or 1");
    if (p.alpha[j] == 1) continue;
    if (l.kind == LayerKind::InvertedResidual) {
      if (weights) {
        InvertedResidualBlock b = block_from_layer(l, (*weights)[i]);
        b.relu_alpha = false;
        MergedConv m;
        try {
          m = merge_block(b);
        } catch (const InputError& e) {
          throw InputError("block '" + l.name + "' cannot be merged: " + e.what());
        }
        (*weights)[i].convs = {m.weights};
      }
      l = merged_layer(l);
    } else {
      l.alpha = false;
    }
  }
  normalize(out);
  return out;
}

// ------------------------------------------------------------ file I/O

/// Scores file: JSON array of {"block_id", "score"}. block_id is a layer
/// name or a 0-based candidate index. Returns scores in candidate order.
inline std::vector<double> parse_scores(const std::string& text, const NetworkSpec& net) {
  const std::vector<int> cand = prune_candidates(net);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("scores: not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw InputError("scores: expected a JSON array");
  std::vector<double> out(cand.size(), 0.0);
  std::vector<bool> seen(cand.size(), false);
  for (size_t n = 0; n < j.size(); ++n) {
    const auto& e = j[n];
    const std::string where = "scores[" + std::to_string(n) + "]";
    if (!e.is_object() || !e.contains("block_id") || !e.contains("score"))
      throw InputError(where + ": expected {block_id, score}");
    if (!e["score"].is_number()) throw InputError(where + ": score must be a number");
    size_t slot = cand.size();
    const auto& id = e["block_id"];
    if (id.is_number_integer()) {
      const auto v = id.get<int64_t>();
      if (v >= 0 && static_cast<size_t>(v) < cand.size()) slot = static_cast<size_t>(v);
    } else if (id.is_string()) {
      const int li = net.find(id.get<std::string>());
      const auto it = std::find(cand.begin(), cand.end(), li);
      if (li >= 0 && it != cand.end()) slot = static_cast<size_t>(it - cand.begin());
    }
    if (slot == cand.size()) throw InputError(where + ": block_id " + id.dump() + " is not a prunable block");
    if (seen[slot]) throw InputError(where + ": block_id " + id.dump() + " listed twice");
    seen[slot] = true;
    out[slot] = e["score"].get<double>();
    if (!std::isfinite(out[slot])) throw InputError(where + ": score is not finite");
  }
  for (size_t s = 0; s < cand.size(); ++s)
    if (!seen[s]) throw InputError("scores: no score for block '" + net.layers[static_cast<size_t>(cand[s])].name + "'");
  return out;
}

inline std::vector<double> load_scores(const std::string& path, const NetworkSpec& net) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scores file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scores(ss.str(), net);
}

inline ordered_json to_json(const AlphaPlan& p, const NetworkSpec& net) {
  ordered_json o;
  o["budget"] = p.budget;
  o["mu"] = p.mu;
  o["kept"] = p.kept();
  ordered_json blocks = ordered_json::array();
  for (size_t j = 0; j < p.layers.size(); ++j) {
    ordered_json b;
    b["block_id"] = net.layers[static_cast<size_t>(p.layers[j])].name;
    b["alpha"] = p.alpha[j];
    b["delta_bytes"] = p.delta[j];
    blocks.push_back(b);
  }
  o["blocks"] = blocks;
  return o;
}

/// Read the alpha entries of a plan document back against a network.
inline AlphaPlan plan_from_json(const nlohmann::json& j, const NetworkSpec& net) {
  AlphaPlan p;
  p.layers = prune_candidates(net);
  p.alpha.assign(p.layers.size(), 1);
  p.delta.assign(p.layers.size(), 0.0);
  if (!j.is_object() || !j.contains("blocks") || !j["blocks"].is_array()) throw InputError("plan: expected {blocks: [...]}");
  p.budget = j.value("budget", 0);
  p.mu = j.value("mu", 0.0);
  for (const auto& b : j["blocks"]) {
    if (!b.contains("block_id") || !b["block_id"].is_string() || !b.contains("alpha"))
      throw InputError("plan: each block needs block_id and alpha");
    const int li = net.find(b["block_id"].get<std::string>());
    const auto it = std::find(p.layers.begin(), p.layers.end(), li);
    if (li < 0 || it == p.layers.end()) throw InputError("plan: '" + b["block_id"].get<std::string>() + "' is not a prunable block");
    p.alpha[static_cast<size_t>(it - p.layers.begin())] = b["alpha"].get<int>();
  }
  return p;
}

}  // namespace copriv

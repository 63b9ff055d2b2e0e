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

// Analytical communication model. Two views of every conv:
//  * units: the closed forms C K r^2 (lambda + HW) and friends, in l-bit
//    units with lambda counted once per multiplier;
//  * bytes: helper-data bits l (lambda + t l) per multiplier group plus the
//    Beaver openings, which is exactly what the engine charges.
// Reports, ratios and the planner use bytes; units are kept for reference.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copriv/accounting.hpp"
#include "copriv/channel.hpp"
#include "copriv/conv_protocols.hpp"
#include "copriv/errors.hpp"
#include "copriv/netspec.hpp"
#include "copriv/ring.hpp"
#include "copriv/winograd.hpp"

namespace copriv {

/// Network-wide protocol choice for Winograd-eligible convs.
enum class NetworkPolicy { Regular, WinogradEWMM, WinogradGEMM, WinogradAuto };

inline const char* policy_name(NetworkPolicy p) {
  switch (p) {
    case NetworkPolicy::Regular: return "regular";
    case NetworkPolicy::WinogradEWMM: return "winograd-ewmm";
    case NetworkPolicy::WinogradGEMM: return "winograd-gemm";
    case NetworkPolicy::WinogradAuto: return "winograd-auto";
  }
  return "?";
}

inline std::optional<NetworkPolicy> parse_policy(const std::string& s) {
  for (NetworkPolicy p : {NetworkPolicy::Regular, NetworkPolicy::WinogradEWMM, NetworkPolicy::WinogradGEMM,
                          NetworkPolicy::WinogradAuto})
    if (s == policy_name(p)) return p;
  return std::nullopt;
}

/// Closed forms in l-bit units. n is the Winograd tile size m + r - 1.
namespace units {

inline double regular_conv(double C, double K, double r, double H, double W, double lambda) {
  return C * K * r * r * (lambda + H * W);
}
inline double ewmm(double C, double K, double T, double n, double lambda) { return lambda * C * K * T * n * n; }
inline double gemm_server(double C, double T, double K, double n, double lambda) { return n * n * C * T * (lambda + K); }
inline double gemm_client(double C, double K, double T, double n, double lambda) { return n * n * C * K * (lambda + T); }
inline double relu(double H, double W, double C, double c_relu) { return c_relu * H * W * C; }
inline double trunc(double H, double W, double C, double c_trunc) { return c_trunc * H * W * C; }
inline double to_bytes(double u, const RingConfig& cfg) { return u * cfg.l / 8.0; }

}  // namespace units

/// Geometry of one convolution.
struct ConvShape {
  int batch = 1;
  int c_in = 1;
  int c_out = 1;
  int groups = 1;
  int r = 1;
  int stride = 1;
  int pad = 0;
  int h_in = 1;
  int w_in = 1;

  int h_out() const { return conv_out_size(h_in, r, stride, pad); }
  int w_out() const { return conv_out_size(w_in, r, stride, pad); }
  int cpg() const { return c_in / groups; }
  int kpg() const { return c_out / groups; }
  size_t out_elems() const { return static_cast<size_t>(batch) * c_out * h_out() * w_out(); }
  Shape4 input() const { return {batch, c_in, h_in, w_in}; }
  Shape4 filter() const { return {c_out, cpg(), r, r}; }
  ConvParams params() const { return {stride, pad, groups}; }
};

inline ConvShape conv_shape(const LayerSpec& l) {
  ConvShape s;
  s.c_in = l.c_in;
  s.c_out = l.c_out;
  s.groups = l.groups();
  s.r = l.r;
  s.stride = l.stride;
  s.pad = l.padding;
  s.h_in = l.h_in;
  s.w_in = l.w_in;
  return s;
}

/// Modeled cost of one convolution under one protocol.
struct ConvCost {
  ConvProtocolKind kind = ConvProtocolKind::RegularBatched;
  int m = 0;
  SenderChoice sender = SenderChoice::Server;  // resolved
  uint64_t groups = 0;                         // multiplier groups
  uint64_t t = 0;                              // co-operands per group
  double units = 0;
  uint64_t preprocessing_bytes = 0;
  uint64_t online_bytes = 0;
  int pending_shift = 0;
  uint64_t trunc_elems = 0;

  uint64_t bytes() const { return preprocessing_bytes + online_bytes; }
};

/// Same group/t decomposition as the conv protocols, so bytes are exact.
inline ConvCost conv_cost(const ConvShape& s, ConvProtocolKind kind, const RingConfig& cfg, const CostConstants& k,
                          int m = 2, SenderChoice requested = SenderChoice::Auto) {
  if (s.c_in % s.groups != 0 || s.c_out % s.groups != 0) throw InputError("channels not divisible by groups");
  const double lam = cfg.lambda;
  const uint64_t N = static_cast<uint64_t>(s.batch);
  const uint64_t cpg = static_cast<uint64_t>(s.cpg()), kpg = static_cast<uint64_t>(s.kpg());
  const uint64_t C = static_cast<uint64_t>(s.c_in), K = static_cast<uint64_t>(s.c_out);
  ConvCost c;
  c.kind = kind;
  c.trunc_elems = s.out_elems();
  if (kind == ConvProtocolKind::RegularBatched) {
    const uint64_t taps = static_cast<uint64_t>(s.r) * s.r;
    const uint64_t hw = static_cast<uint64_t>(s.h_out()) * s.w_out();
    c.groups = K * cpg * taps;
    c.t = N * hw;
    c.units = units::regular_conv(static_cast<double>(cpg), static_cast<double>(K), s.r, 1, static_cast<double>(N * hw), lam);
    c.pending_shift = cfg.scale;
  } else {
    const WinogradVariant v = WinogradVariant::select(m, s.r, s.stride);
    const TileGeometry g = TileGeometry::make(s.h_in + 2 * s.pad, s.w_in + 2 * s.pad, v);
    const uint64_t nn = static_cast<uint64_t>(v.n()) * v.n();
    const uint64_t T = static_cast<uint64_t>(g.tiles());
    const double n = v.n();
    c.m = m;
    c.pending_shift = cfg.scale + default_filter_extra_bits(v);
    if (kind == ConvProtocolKind::WinogradEWMM) {
      c.groups = nn * N * K * cpg * T;
      c.t = 1;
      c.units = units::ewmm(static_cast<double>(cpg), static_cast<double>(K), static_cast<double>(N * T), n, lam);
    } else {
      c.sender = resolve_sender(requested, static_cast<int64_t>(kpg), static_cast<int64_t>(N * T));
      if (c.sender == SenderChoice::Server) {
        c.groups = nn * C * N * T;
        c.t = kpg;
        c.units = static_cast<double>(s.groups) *
                  units::gemm_server(static_cast<double>(cpg), static_cast<double>(N * T), static_cast<double>(kpg), n, lam);
      } else {
        c.groups = nn * K * cpg;
        c.t = N * T;
        c.units = static_cast<double>(s.groups) *
                  units::gemm_client(static_cast<double>(cpg), static_cast<double>(kpg), static_cast<double>(N * T), n, lam);
      }
    }
  }
  c.preprocessing_bytes = preprocessing_bytes(helper_bits(c.groups, c.t, cfg), k.k_ot);
  c.online_bytes = beaver_online_bytes(c.groups, c.t, cfg);
  return c;
}

/// Winograd tile size a layer allows, or 0 when it must run regular.
inline int winograd_m(const LayerSpec& l) {
  const bool shape_ok = (l.kind == LayerKind::Conv || l.kind == LayerKind::DWConv ||
                         l.kind == LayerKind::InvertedResidual) &&
                        l.r == 3 && l.stride <= 2;
  if (!shape_ok || l.policy == WinogradPolicy::Regular) return 0;
  if (l.stride == 2) return 2;
  return l.policy == WinogradPolicy::M4 ? 4 : 2;
}

/// Protocol and requested sender for a conv under a network policy.
struct ConvChoice {
  ConvProtocolKind kind = ConvProtocolKind::RegularBatched;
  int m = 0;
  SenderChoice sender = SenderChoice::Server;
};

inline ConvChoice choose_protocol(NetworkPolicy policy, int m) {
  if (m == 0 || policy == NetworkPolicy::Regular) return {};
  switch (policy) {
    case NetworkPolicy::WinogradEWMM: return {ConvProtocolKind::WinogradEWMM, m, SenderChoice::Server};
    case NetworkPolicy::WinogradGEMM: return {ConvProtocolKind::WinogradGEMM, m, SenderChoice::Server};
    default: return {ConvProtocolKind::WinogradGEMM, m, SenderChoice::Auto};
  }
}

/// Cost of a conv layer's main convolution under an explicit protocol. A
/// Winograd kind on a layer that is not a 3x3 conv is an error.
inline ConvCost layer_cost(const LayerSpec& l, ConvProtocolKind kind, const RingConfig& cfg,
                           const CostConstants& k = {}, SenderChoice sender = SenderChoice::Auto) {
  if (!l.is_conv()) throw InputError("layer '" + l.name + "' is not a convolution");
  if (kind != ConvProtocolKind::RegularBatched && l.r != 3)
    throw UnsupportedVariant("layer '" + l.name + "' has r=" + std::to_string(l.r) + ", Winograd needs r=3");
  const int m = kind == ConvProtocolKind::RegularBatched ? 0 : std::max(2, winograd_m(l));
  return conv_cost(conv_shape(l), kind, cfg, k, m, sender);
}

// ------------------------------------------------------------- steps

/// One communicating operation of a network, in execution order.
struct CostStep {
  enum class Kind { Conv, Trunc, Relu } kind = Kind::Conv;
  std::string layer;
  ConvShape shape;       // Conv
  ConvChoice choice;     // Conv
  size_t elems = 0;      // Trunc, Relu
  int shift = 0;         // Trunc
  int stages = 1;        // Relu: comparisons per element
};

namespace detail {

inline void push_conv(std::vector<CostStep>& out, const std::string& name, const ConvShape& s, ConvChoice ch,
                      const RingConfig& cfg) {
  CostStep c;
  c.kind = CostStep::Kind::Conv;
  c.layer = name;
  c.shape = s;
  c.choice = ch;
  out.push_back(c);
  CostStep t;
  t.kind = CostStep::Kind::Trunc;
  t.layer = name;
  t.elems = s.out_elems();
  t.shift = ch.kind == ConvProtocolKind::RegularBatched
                ? cfg.scale
                : cfg.scale + default_filter_extra_bits(WinogradVariant::select(ch.m, s.r, s.stride));
  if (t.shift > 0) out.push_back(t);
}

inline void push_relu(std::vector<CostStep>& out, const std::string& name, size_t elems, int stages = 1) {
  CostStep r;
  r.kind = CostStep::Kind::Relu;
  r.layer = name;
  r.elems = elems;
  r.stages = stages;
  out.push_back(r);
}

}  // namespace detail

/// Sub-layer names of an inverted residual block.
inline std::string ir_part(const LayerSpec& l, const char* part) { return l.name + "." + part; }

/// Communicating steps of layer i under `policy`.
inline std::vector<CostStep> layer_steps(const NetworkSpec& net, size_t i, NetworkPolicy policy, const RingConfig& cfg) {
  const LayerSpec& l = net.layers[i];
  std::vector<CostStep> out;
  const size_t out_elems = static_cast<size_t>(l.c_out) * l.h * l.w;
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::DWConv:
    case LayerKind::PWConv:
    case LayerKind::FC: {
      detail::push_conv(out, l.name, conv_shape(l), choose_protocol(policy, winograd_m(l)), cfg);
      if (l.shortcut.kind == ShortcutKind::Projection) {
        const LayerSpec& src = net.layers[static_cast<size_t>(net.find(l.shortcut.from))];
        ConvShape s;
        s.c_in = src.c_in;
        s.c_out = l.c_out;
        s.stride = shortcut_stride(net, i);
        s.h_in = src.h_in;
        s.w_in = src.w_in;
        detail::push_conv(out, l.name + ".shortcut", s, {}, cfg);
      }
      if (l.alpha) detail::push_relu(out, l.name, out_elems);
      break;
    }
    case LayerKind::InvertedResidual: {
      const size_t hidden_in = static_cast<size_t>(l.hidden) * l.h_in * l.w_in;
      const size_t hidden_out = static_cast<size_t>(l.hidden) * l.h * l.w;
      if (l.has_pw1()) {
        ConvShape pw1;
        pw1.c_in = l.c_in;
        pw1.c_out = l.hidden;
        pw1.h_in = l.h_in;
        pw1.w_in = l.w_in;
        detail::push_conv(out, ir_part(l, "pw1"), pw1, {}, cfg);
        if (l.alpha) detail::push_relu(out, ir_part(l, "pw1"), hidden_in);
      }
      ConvShape dw;
      dw.c_in = dw.c_out = dw.groups = l.hidden;
      dw.r = l.r;
      dw.stride = l.stride;
      dw.pad = l.padding;
      dw.h_in = l.h_in;
      dw.w_in = l.w_in;
      detail::push_conv(out, ir_part(l, "dw"), dw, choose_protocol(policy, winograd_m(l)), cfg);
      if (l.alpha) detail::push_relu(out, ir_part(l, "dw"), hidden_out);
      ConvShape pw2;
      pw2.c_in = l.hidden;
      pw2.c_out = l.c_out;
      pw2.h_in = l.h;
      pw2.w_in = l.w;
      detail::push_conv(out, ir_part(l, "pw2"), pw2, {}, cfg);
      break;
    }
    case LayerKind::Pool:
      if (l.pool == PoolOp::Max) {
        if (l.r * l.r > 1) detail::push_relu(out, l.name, out_elems, l.r * l.r - 1);
      } else if (cfg.scale > 0) {
        CostStep t;
        t.kind = CostStep::Kind::Trunc;
        t.layer = l.name;
        t.elems = out_elems;
        t.shift = cfg.scale;
        out.push_back(t);
      }
      break;
    case LayerKind::ReLU:
      detail::push_relu(out, l.name, out_elems);
      break;
    case LayerKind::Trunc:
      if (cfg.scale > 0) {
        CostStep t;
        t.kind = CostStep::Kind::Trunc;
        t.layer = l.name;
        t.elems = out_elems;
        t.shift = cfg.scale;
        out.push_back(t);
      }
      break;
  }
  return out;
}

// ------------------------------------------------------------ reports

inline constexpr const char* kOpConv = "conv";
inline constexpr const char* kOpTrunc = "trunc";
inline constexpr const char* kOpRelu = "relu";

struct CommRecord {
  std::string block;
  std::string layer;
  std::string op;
  Phase phase = Phase::Online;
  uint64_t modeled_bytes = 0;
  std::optional<uint64_t> measured_bytes;
  std::string sender;    // Winograd GEMM convs only
  std::string protocol;  // convs only
  double units = 0;      // convs only, l-bit units

  friend bool operator==(const CommRecord&, const CommRecord&) = default;
};

struct CommTotals {
  uint64_t online = 0;
  uint64_t preprocessing = 0;
  uint64_t grand = 0;

  friend bool operator==(const CommTotals&, const CommTotals&) = default;
};

struct CommReport {
  std::string network;
  std::string policy;
  std::vector<CommRecord> records;

  template <class Pred>
  uint64_t modeled_sum(Pred&& pred) const {
    uint64_t s = 0;
    for (const auto& r : records)
      if (pred(r)) s += r.modeled_bytes;
    return s;
  }

  CommTotals modeled() const {
    CommTotals t;
    for (const auto& r : records) (r.phase == Phase::Online ? t.online : t.preprocessing) += r.modeled_bytes;
    t.grand = t.online + t.preprocessing;
    return t;
  }

  /// Present only when every record carries a measurement.
  std::optional<CommTotals> measured() const {
    CommTotals t;
    for (const auto& r : records) {
      if (!r.measured_bytes) return std::nullopt;
      (r.phase == Phase::Online ? t.online : t.preprocessing) += *r.measured_bytes;
    }
    t.grand = t.online + t.preprocessing;
    return t;
  }

  uint64_t op_total(const std::string& op) const {
    return modeled_sum([&](const CommRecord& r) { return r.op == op; });
  }
};

/// Records of the steps of one layer.
inline std::vector<CommRecord> step_records(const std::string& block, const std::vector<CostStep>& steps,
                                            const RingConfig& cfg, const CostConstants& k) {
  std::vector<CommRecord> out;
  for (const CostStep& s : steps) {
    if (s.kind == CostStep::Kind::Conv) {
      const ConvCost c = conv_cost(s.shape, s.choice.kind, cfg, k, s.choice.m, s.choice.sender);
      const std::string sender = c.kind == ConvProtocolKind::WinogradGEMM ? sender_name(c.sender) : "";
      out.push_back({block, s.layer, kOpConv, Phase::Preprocessing, c.preprocessing_bytes, std::nullopt, sender,
                     kind_name(c.kind), c.units});
      out.push_back({block, s.layer, kOpConv, Phase::Online, c.online_bytes, std::nullopt, sender, kind_name(c.kind), 0});
    } else if (s.kind == CostStep::Kind::Trunc) {
      out.push_back({block, s.layer, kOpTrunc, Phase::Online, elementwise_online_bytes(s.elems, k.c_trunc, cfg),
                     std::nullopt, "", "", 0});
    } else {
      const uint64_t b = static_cast<uint64_t>(s.stages) * elementwise_online_bytes(s.elems, k.c_relu, cfg);
      out.push_back({block, s.layer, kOpRelu, Phase::Online, b, std::nullopt, "", "", 0});
    }
  }
  return out;
}

/// Modeled bytes of the whole network under one policy.
inline CommReport network_cost(const NetworkSpec& net, NetworkPolicy policy, const RingConfig& cfg = {},
                               const CostConstants& k = {}) {
  CommReport rep;
  rep.network = net.name;
  rep.policy = policy_name(policy);
  for (size_t i = 0; i < net.layers.size(); ++i) {
    auto recs = step_records(net.layers[i].block, layer_steps(net, i, policy, cfg), cfg, k);
    rep.records.insert(rep.records.end(), recs.begin(), recs.end());
  }
  return rep;
}

/// Modeled total bytes of layer i alone.
inline uint64_t layer_total(const NetworkSpec& net, size_t i, NetworkPolicy policy, const RingConfig& cfg = {},
                            const CostConstants& k = {}) {
  uint64_t s = 0;
  for (const auto& r : step_records(net.layers[i].block, layer_steps(net, i, policy, cfg), cfg, k)) s += r.modeled_bytes;
  return s;
}

/// Per-block sums in the shape of a stacked bar chart.
struct BlockBreakdown {
  std::string block;
  uint64_t conv_preprocessing = 0;
  uint64_t conv_online = 0;
  uint64_t trunc_online = 0;
  uint64_t relu_online = 0;

  uint64_t online() const { return conv_online + trunc_online + relu_online; }
  uint64_t total() const { return online() + conv_preprocessing; }
};

inline std::vector<BlockBreakdown> block_breakdown(const CommReport& rep) {
  std::vector<BlockBreakdown> out;
  std::map<std::string, size_t> at;
  for (const auto& r : rep.records) {
    auto [it, fresh] = at.emplace(r.block, out.size());
    if (fresh) out.push_back({r.block});
    BlockBreakdown& b = out[it->second];
    if (r.op == kOpConv) {
      (r.phase == Phase::Preprocessing ? b.conv_preprocessing : b.conv_online) += r.modeled_bytes;
    } else if (r.op == kOpTrunc) {
      b.trunc_online += r.modeled_bytes;
    } else {
      b.relu_online += r.modeled_bytes;
    }
  }
  return out;
}

inline std::string to_csv(const CommReport& rep) {
  std::ostringstream os;
  os << "block,layer,op,phase,modeled_bytes,measured_bytes,sender\n";
  for (const auto& r : rep.records) {
    os << r.block << ',' << r.layer << ',' << r.op << ',' << phase_name(r.phase) << ',' << r.modeled_bytes << ',';
    if (r.measured_bytes) os << *r.measured_bytes;
    os << ',' << r.sender << '\n';
  }
  return os.str();
}

inline ordered_json totals_json(const CommTotals& t) {
  return {{"online", t.online}, {"preprocessing", t.preprocessing}, {"grand", t.grand}};
}

inline ordered_json to_json(const CommReport& rep) {
  ordered_json j;
  j["network"] = rep.network;
  j["policy"] = rep.policy;
  j["totals"] = {{"modeled", totals_json(rep.modeled())}};
  if (auto m = rep.measured()) j["totals"]["measured"] = totals_json(*m);
  ordered_json blocks = ordered_json::array();
  for (const auto& b : block_breakdown(rep))
    blocks.push_back({{"block", b.block},
                      {"conv_preprocessing", b.conv_preprocessing},
                      {"conv_online", b.conv_online},
                      {"trunc_online", b.trunc_online},
                      {"relu_online", b.relu_online}});
  j["blocks"] = std::move(blocks);
  ordered_json recs = ordered_json::array();
  for (const auto& r : rep.records) {
    ordered_json o = {{"block", r.block}, {"layer", r.layer}, {"op", r.op}, {"phase", phase_name(r.phase)},
                      {"modeled_bytes", r.modeled_bytes}};
    o["measured_bytes"] = r.measured_bytes ? ordered_json(*r.measured_bytes) : ordered_json(nullptr);
    o["sender"] = r.sender;
    if (!r.protocol.empty()) o["protocol"] = r.protocol;
    if (r.units > 0) o["units"] = r.units;
    recs.push_back(std::move(o));
  }
  j["records"] = std::move(recs);
  return j;
}

// -------------------------------------------------------- calibration

/// Least-squares scale factors mapping modeled to measured bytes, one per
/// category: helper data (k_ot), ReLU (c_relu) and truncation (c_trunc).
/// Measurements come from measured_bytes when present, else modeled_bytes.
/// Categories with no modeled bytes keep factor 1.
inline CostConstants calibrate(const CommReport& measured, const CommReport& modeled) {
  if (measured.records.size() != modeled.records.size())
    throw InputError("calibration reports cover different record sets");
  double num[3] = {0, 0, 0}, den[3] = {0, 0, 0};
  for (size_t i = 0; i < modeled.records.size(); ++i) {
    const CommRecord& a = measured.records[i];
    const CommRecord& d = modeled.records[i];
    if (a.layer != d.layer || a.op != d.op || a.phase != d.phase)
      throw InputError("calibration record " + std::to_string(i) + " does not match: '" + a.layer + "' vs '" + d.layer + "'");
    int cat = -1;
    if (d.phase == Phase::Preprocessing) cat = 0;
    else if (d.op == kOpRelu) cat = 1;
    else if (d.op == kOpTrunc) cat = 2;
    if (cat < 0) continue;
    const double x = static_cast<double>(d.modeled_bytes);
    const double y = static_cast<double>(a.measured_bytes ? *a.measured_bytes : a.modeled_bytes);
    num[cat] += x * y;
    den[cat] += x * x;
  }
  CostConstants out;
  out.k_ot = den[0] > 0 ? num[0] / den[0] : 1.0;
  out.c_relu = den[1] > 0 ? num[1] / den[1] : 1.0;
  out.c_trunc = den[2] > 0 ? num[2] / den[2] : 1.0;
  return out;
}

}  // namespace copriv

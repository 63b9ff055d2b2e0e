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

// Whole-network inference, layer by layer. One executor drives two
// backends: a plaintext ring-arithmetic oracle and the two-party engine.
// The secure run measures every step and fills the cost-model report.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "copriv/conv_protocols.hpp"
#include "copriv/cost_model.hpp"
#include "copriv/engine.hpp"
#include "copriv/errors.hpp"
#include "copriv/netspec.hpp"

namespace copriv {

inline constexpr uint64_t kDefaultMaxMults = 10'000'000;

struct SimOptions {
  NetworkPolicy policy = NetworkPolicy::WinogradAuto;
  RingConfig cfg{};
  CostConstants constants{};
  uint64_t seed = 1;
  Schedule schedule = Schedule::Sequential;
  bool transcript = false;
  uint64_t max_mults = kDefaultMaxMults;
};

/// Plaintext multiply count of a direct evaluation (all convs, shortcuts
/// included). The desk-scale guard compares against this.
inline uint64_t multiplication_count(const NetworkSpec& net) {
  auto conv = [](uint64_t out, uint64_t cpg, uint64_t r) { return out * cpg * r * r; };
  uint64_t n = 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const uint64_t hw = static_cast<uint64_t>(l.h) * l.w;
    if (l.is_conv()) n += conv(hw * l.c_out, static_cast<uint64_t>(l.c_in / l.groups()), l.r);
    if (l.kind == LayerKind::InvertedResidual) {
      if (l.has_pw1()) n += conv(static_cast<uint64_t>(l.h_in) * l.w_in * l.hidden, l.c_in, 1);
      n += conv(hw * l.hidden, 1, l.r) + conv(hw * l.c_out, l.hidden, 1);
    }
    if (l.shortcut.kind == ShortcutKind::Projection) {
      const LayerSpec& src = net.layers[static_cast<size_t>(net.find(l.shortcut.from))];
      n += conv(hw * l.c_out, src.c_in, 1);
    }
  }
  return n;
}

/// Seeded network input in [-1, 1), on the fixed-point grid.
inline Tensor<double> random_input(const NetworkSpec& net, uint64_t seed, const RingConfig& cfg) {
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<double> x({1, net.in_c, net.in_h, net.in_w});
  for (auto& v : x.vec()) v = quantize(u(rng), cfg);
  return x;
}

namespace detail {

// Local index maps. They are linear, so each share is mapped on its own.

inline FixedTensor pad_channels(const FixedTensor& x, int before, int after) {
  const Shape4 s = x.shape;
  FixedTensor out({s.n, s.c + before + after, s.h, s.w}, x.cfg);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.data[out.shape.index(n, c + before, h, w)] = x.data[s.index(n, c, h, w)];
  return out;
}

inline FixedTensor subsample(const FixedTensor& x, int stride, int ho, int wo) {
  const Shape4 s = x.shape;
  FixedTensor out({s.n, s.c, ho, wo}, x.cfg);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < ho; ++h)
        for (int w = 0; w < wo; ++w) out.data[out.shape.index(n, c, h, w)] = x.data[s.index(n, c, h * stride, w * stride)];
  return out;
}

/// Tap (di, dj) of every pooling window; zero outside the input.
inline FixedTensor window_tap(const FixedTensor& x, int stride, int pad, int di, int dj, int ho, int wo) {
  const Shape4 s = x.shape;
  FixedTensor out({s.n, s.c, ho, wo}, x.cfg);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < ho; ++h)
        for (int w = 0; w < wo; ++w) {
          const int ih = h * stride - pad + di;
          const int iw = w * stride - pad + dj;
          if (ih < 0 || iw < 0 || ih >= s.h || iw >= s.w) continue;
          out.data[out.shape.index(n, c, h, w)] = x.data[s.index(n, c, ih, iw)];
        }
  return out;
}

inline FixedTensor scale_by(const FixedTensor& x, uint64_t k) {
  FixedTensor out = x;
  const uint64_t mask = x.cfg.mask();
  for (auto& v : out.data) v = (v * k) & mask;
  return out;
}

inline FixedTensor sub(const FixedTensor& a, const FixedTensor& b) {
  FixedTensor out = a;
  const uint64_t mask = a.cfg.mask();
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = (a.data[i] - b.data[i]) & mask;
  return out;
}

inline std::vector<uint64_t> encode_bias(const std::vector<double>& b, int channels, const RingConfig& cfg) {
  std::vector<uint64_t> out(static_cast<size_t>(channels), 0);
  for (size_t i = 0; i < b.size() && i < out.size(); ++i) out[i] = encode(b[i], cfg).value;
  return out;
}

}  // namespace detail

/// Plaintext ring arithmetic with the secure engine's encodings and floor
/// truncation. Winograd choices are ignored: the oracle convolves directly.
struct PlainBackend {
  using Value = FixedTensor;
  RingConfig cfg;

  Value conv(const std::string&, const Value& x, const Tensor<double>& w, const ConvParams& p, const ConvChoice&) {
    return direct_conv_fixed(x, w, p);
  }
  Value bias(const Value& x, const std::vector<double>& b) {
    const auto enc = detail::encode_bias(b, x.shape.c, cfg);
    Value out = x;
    const Shape4 s = x.shape;
    for (size_t i = 0; i < out.size(); ++i) {
      const size_t c = (i / (static_cast<size_t>(s.h) * s.w)) % static_cast<size_t>(s.c);
      out.data[i] = (out.data[i] + enc[c]) & cfg.mask();
    }
    return out;
  }
  Value add(const Value& a, const Value& b) {
    Value out = a;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = (a.data[i] + b.data[i]) & cfg.mask();
    return out;
  }
  Value sub(const Value& a, const Value& b) { return detail::sub(a, b); }
  Value relu(const std::string&, const Value& x) {
    Value out = x;
    for (auto& v : out.data)
      if (ring::to_signed(v, cfg) < 0) v = 0;
    return out;
  }
  Value trunc(const std::string&, const Value& x, int shift) {
    Value out = x;
    for (auto& v : out.data) v = ring::arith_shift(v, shift, cfg);
    return out;
  }
  template <class F>
  Value local(const Value& x, F&& f) {
    return f(x);
  }
};

/// Bytes moved by one executed step.
struct MeasuredStep {
  CostStep::Kind kind = CostStep::Kind::Conv;
  std::string layer;
  uint64_t preprocessing = 0;
  uint64_t online = 0;
  int stages = 1;
  std::string sender;
};

/// The two-party engine, metered step by step.
struct SecureBackend {
  using Value = SharePair;
  Runtime& rt;
  std::vector<MeasuredStep> steps;

  explicit SecureBackend(Runtime& r) : rt(r) {}

  Value conv(const std::string& name, const Value& x, const Tensor<double>& w, const ConvParams& p,
             const ConvChoice& ch) {
    MeasuredStep st = step(CostStep::Kind::Conv, name);
    ConvOutput o;
    start();
    if (ch.kind == ConvProtocolKind::RegularBatched) {
      o = conv_regular_raw(rt, x, w, p);
    } else {
      const WinogradPlan plan = WinogradPlan::make(x.shape(), w.shape(), p, ch.m, ch.sender);
      o = ch.kind == ConvProtocolKind::WinogradEWMM ? conv_winograd_ewmm_raw(rt, x, w, plan)
                                                    : conv_winograd_gemm_raw(rt, x, w, plan);
      if (ch.kind == ConvProtocolKind::WinogradGEMM) st.sender = sender_name(o.sender);
    }
    stop(st);
    return trunc(name, o.y, o.pending_shift);
  }
  Value bias(const Value& x, const std::vector<double>& b) {
    return add_channel_constant(x, detail::encode_bias(b, x.shape().c, rt.cfg()));
  }
  Value add(const Value& a, const Value& b) { return copriv::add(a, b); }
  Value sub(const Value& a, const Value& b) {
    return local2(a, b, [](const FixedTensor& u, const FixedTensor& v) { return detail::sub(u, v); });
  }
  Value relu(const std::string& name, const Value& x) {
    MeasuredStep st = step(CostStep::Kind::Relu, name);
    start();
    Value y = relu_shared(rt, x);
    stop(st);
    if (!steps.empty() && steps.back().kind == CostStep::Kind::Relu && steps.back().layer == name) {
      steps.back().preprocessing += st.preprocessing;
      steps.back().online += st.online;
      ++steps.back().stages;
    } else {
      steps.push_back(st);
    }
    return y;
  }
  Value trunc(const std::string& name, const Value& x, int shift) {
    if (shift == 0) return x;
    MeasuredStep st = step(CostStep::Kind::Trunc, name);
    start();
    Value y = truncate(rt, x, shift);
    stop(st);
    steps.push_back(st);
    return y;
  }
  template <class F>
  Value local(const Value& x, F&& f) {
    Value out = x;
    for (Party p : kParties) out.of(p).payload = f(x.of(p).payload);
    return out;
  }

 private:
  uint64_t pre0_ = 0, on0_ = 0;

  static MeasuredStep step(CostStep::Kind kind, const std::string& name) {
    MeasuredStep st;
    st.kind = kind;
    st.layer = name;
    return st;
  }

  template <class F>
  Value local2(const Value& a, const Value& b, F&& f) {
    Value out = a;
    for (Party p : kParties) out.of(p).payload = f(a.of(p).payload, b.of(p).payload);
    return out;
  }
  void start() {
    pre0_ = rt.channel().preprocessing_total_bytes();
    on0_ = rt.channel().online_bytes();
  }
  void stop(MeasuredStep& st) {
    st.preprocessing = rt.channel().preprocessing_total_bytes() - pre0_;
    st.online = rt.channel().online_bytes() - on0_;
    if (st.kind == CostStep::Kind::Conv) steps.push_back(st);
  }
};

/// Evaluate the network on either backend. Step order follows the cost
/// model's layer_steps exactly.
template <class B>
typename B::Value run_network(const NetworkSpec& net, const NetworkWeights& weights, typename B::Value x, B& be,
                              NetworkPolicy policy, const RingConfig& cfg) {
  using V = typename B::Value;
  check_weights(net, weights);
  std::set<std::string> sources;
  for (const auto& l : net.layers)
    if (l.shortcut.kind != ShortcutKind::None) sources.insert(l.shortcut.from);
  std::map<std::string, V> saved;

  auto conv_bias = [&](const std::string& name, const V& in, const ConvWeights& cw, const ConvParams& p,
                       const ConvChoice& ch) { return be.bias(be.conv(name, in, cw.w, p, ch), cw.b); };

  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const auto& cw = weights[i].convs;
    if (sources.count(l.name)) saved.emplace(l.name, x);
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::DWConv:
      case LayerKind::PWConv:
      case LayerKind::FC: {
        V y = conv_bias(l.name, x, cw[0], l.params(), choose_protocol(policy, winograd_m(l)));
        const Shortcut& sc = l.shortcut;
        if (sc.kind != ShortcutKind::None) {
          const V& src = saved.at(sc.from);
          const int s = shortcut_stride(net, i);
          V res;
          if (sc.kind == ShortcutKind::Projection) {
            res = conv_bias(l.name + ".shortcut", src, cw[1], ConvParams{s, 0, 1}, ConvChoice{});
          } else if (sc.kind == ShortcutKind::OptionA) {
            const int extra = l.c_out - net.layers[static_cast<size_t>(net.find(sc.from))].c_in;
            res = be.local(src, [&](const FixedTensor& t) {
              return detail::pad_channels(detail::subsample(t, s, l.h, l.w), extra / 2, extra - extra / 2);
            });
          } else {
            res = src;
          }
          y = be.add(y, res);
        }
        if (l.alpha) y = be.relu(l.name, y);
        x = std::move(y);
        break;
      }
      case LayerKind::InvertedResidual: {
        size_t at = 0;
        V h = x;
        if (l.has_pw1()) {
          h = conv_bias(ir_part(l, "pw1"), h, cw[at++], ConvParams{}, ConvChoice{});
          if (l.alpha) h = be.relu(ir_part(l, "pw1"), h);
        }
        h = conv_bias(ir_part(l, "dw"), h, cw[at++], ConvParams{l.stride, l.padding, l.hidden},
                      choose_protocol(policy, winograd_m(l)));
        if (l.alpha) h = be.relu(ir_part(l, "dw"), h);
        h = conv_bias(ir_part(l, "pw2"), h, cw[at++], ConvParams{}, ConvChoice{});
        if (l.stride == 1 && l.c_in == l.c_out) h = be.add(h, x);
        x = std::move(h);
        break;
      }
      case LayerKind::Pool: {
        const int r = l.r;
        auto tap = [&](int di, int dj) {
          return be.local(x, [&](const FixedTensor& t) {
            return detail::window_tap(t, l.stride, l.padding, di, dj, l.h, l.w);
          });
        };
        V acc = tap(0, 0);
        if (l.pool == PoolOp::Max) {
          for (int k = 1; k < r * r; ++k) {
            const V t = tap(k / r, k % r);
            acc = be.add(acc, be.relu(l.name, be.sub(t, acc)));
          }
        } else {
          for (int k = 1; k < r * r; ++k) acc = be.add(acc, tap(k / r, k % r));
          const uint64_t inv = encode(1.0 / (r * r), cfg).value;
          acc = be.local(acc, [&](const FixedTensor& t) { return detail::scale_by(t, inv); });
          acc = be.trunc(l.name, acc, cfg.scale);
        }
        x = std::move(acc);
        break;
      }
      case LayerKind::ReLU:
        x = be.relu(l.name, x);
        break;
      case LayerKind::Trunc:
        x = be.trunc(l.name, x, cfg.scale);
        break;
    }
  }
  return x;
}

/// Plaintext fixed-point inference; the oracle for simulate().
inline FixedTensor plaintext_inference(const NetworkSpec& net, const NetworkWeights& w, const Tensor<double>& input,
                                       const RingConfig& cfg) {
  PlainBackend be{cfg};
  return run_network(net, w, FixedTensor::encode(input, cfg), be, NetworkPolicy::Regular, cfg);
}

struct SimResult {
  CommReport report;
  FixedTensor output;        // reconstructed
  FixedTensor oracle;        // plaintext
  int64_t max_ulp_deviation = 0;
  double max_abs_deviation = 0;
  uint32_t rounds = 0;
  uint64_t multiplications = 0;
  TranscriptHeader header;
  std::vector<TranscriptRecord> transcript;  // empty unless requested
};

inline int64_t max_ulp_deviation(const FixedTensor& a, const FixedTensor& b) {
  if (!(a.shape == b.shape)) throw InputError("compared tensors differ in shape");
  int64_t m = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const int64_t d = ring::to_signed((a.data[i] - b.data[i]) & a.cfg.mask(), a.cfg);
    m = std::max(m, d < 0 ? -d : d);
  }
  return m;
}

/// Fill each modeled record with the bytes its step actually moved. The
/// executed steps must line up with the model's steps one to one.
inline void attach_measurements(CommReport& rep, const NetworkSpec& net, NetworkPolicy policy, const RingConfig& cfg,
                                const std::vector<MeasuredStep>& measured) {
  std::vector<CostStep> model;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    auto s = layer_steps(net, i, policy, cfg);
    model.insert(model.end(), s.begin(), s.end());
  }
  if (model.size() != measured.size())
    throw ProtocolError("protocol mismatch: model has " + std::to_string(model.size()) + " steps, run executed " +
                        std::to_string(measured.size()));
  size_t r = 0;
  for (size_t k = 0; k < model.size(); ++k) {
    const CostStep& m = model[k];
    const MeasuredStep& e = measured[k];
    if (m.kind != e.kind || m.layer != e.layer || (m.kind == CostStep::Kind::Relu && m.stages != e.stages))
      throw ProtocolError("protocol mismatch at step " + std::to_string(k) + " ('" + m.layer + "' vs '" + e.layer + "')");
    if (m.kind == CostStep::Kind::Conv) {
      if (!e.sender.empty() && rep.records.at(r).sender != e.sender)
        throw ProtocolError("protocol mismatch: '" + e.layer + "' ran with sender " + e.sender);
      rep.records.at(r++).measured_bytes = e.preprocessing;
      rep.records.at(r++).measured_bytes = e.online;
    } else {
      if (e.preprocessing != 0) throw ProtocolError("unexpected helper data in step '" + e.layer + "'");
      rep.records.at(r++).measured_bytes = e.online;
    }
  }
  if (r != rep.records.size()) throw ProtocolError("protocol mismatch: records left unmeasured");
}

/// Two-party inference of the whole network, checked against the
/// plaintext oracle.
inline SimResult simulate(const NetworkSpec& net, const NetworkWeights& weights, const Tensor<double>& input,
                          const SimOptions& opt) {
  SimResult res;
  res.multiplications = multiplication_count(net);
  if (res.multiplications > opt.max_mults)
    throw BudgetError("network needs " + std::to_string(res.multiplications) + " multiplications, limit is " +
                      std::to_string(opt.max_mults));
  check_weights(net, weights);
  if (input.shape() != Shape4{1, net.in_c, net.in_h, net.in_w})
    throw InputError("input shape " + input.shape().str() + " does not match the network");

  Runtime rt(RuntimeOptions{opt.cfg, opt.constants, opt.seed, opt.schedule, opt.transcript});
  SecureBackend be(rt);
  const SharePair x = share(FixedTensor::encode(input, opt.cfg), rt.rng());
  const SharePair y = run_network(net, weights, x, be, opt.policy, opt.cfg);

  res.output = reconstruct(y);
  res.oracle = plaintext_inference(net, weights, input, opt.cfg);
  res.max_ulp_deviation = max_ulp_deviation(res.output, res.oracle);
  res.max_abs_deviation = std::ldexp(static_cast<double>(res.max_ulp_deviation), -opt.cfg.scale);
  res.rounds = rt.channel().rounds();
  res.report = network_cost(net, opt.policy, opt.cfg, opt.constants);
  attach_measurements(res.report, net, opt.policy, opt.cfg, be.steps);
  const auto totals = res.report.measured();
  if (!totals || totals->online != rt.channel().online_bytes() ||
      totals->preprocessing != rt.channel().preprocessing_total_bytes())
    throw ProtocolError("measured records do not add up to the channel totals");
  res.header = rt.transcript_header();
  if (opt.transcript) res.transcript = rt.channel().transcript();
  return res;
}

inline ordered_json summary_json(const SimResult& r) {
  ordered_json o;
  o["max_ulp_deviation"] = r.max_ulp_deviation;
  o["max_abs_deviation"] = r.max_abs_deviation;
  o["rounds"] = r.rounds;
  o["multiplications"] = r.multiplications;
  ordered_json out = ordered_json::array();
  const Tensor<double> y = r.output.decode();
  for (double v : y.vec()) out.push_back(v);
  o["output"] = out;
  return o;
}

}  // namespace copriv

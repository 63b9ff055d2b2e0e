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

// Network descriptions: layer list, dimension checks, JSON schema v1,
// presets and the real-valued weight container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copriv/errors.hpp"
#include "copriv/ring.hpp"
#include "copriv/tensor.hpp"
#include "copriv/winograd.hpp"

namespace copriv {

enum class LayerKind { Conv, DWConv, PWConv, InvertedResidual, ReLU, Trunc, Pool, FC };
enum class WinogradPolicy { Auto, Regular, M2, M4 };
enum class PoolOp { Max, Avg };
enum class ShortcutKind { None, Identity, OptionA, Projection };
enum class Dataset { Cifar, ImageNet };

/// Residual added to a layer's output before its ReLU. `from` names the
/// layer whose input is added.
struct Shortcut {
  ShortcutKind kind = ShortcutKind::None;
  std::string from;

  friend bool operator==(const Shortcut&, const Shortcut&) = default;
};

/// One entry of the layer list. h and w are output extents. For an
/// inverted residual block r/stride/padding describe its depthwise conv and
/// alpha is the flag shared by its two inner ReLUs; for every other layer
/// alpha means a ReLU follows it.
struct LayerSpec {
  std::string name;
  std::string block;
  LayerKind kind = LayerKind::Conv;
  int c_in = 0;
  int c_out = 0;
  int h_in = 0;
  int w_in = 0;
  int h = 0;
  int w = 0;
  int r = 1;
  int stride = 1;
  int padding = 0;
  double expand = 1.0;
  int hidden = 0;
  bool alpha = false;
  WinogradPolicy policy = WinogradPolicy::Regular;
  PoolOp pool = PoolOp::Max;
  Shortcut shortcut;
  bool bn = true;
  std::string merged_from;

  bool is_conv() const {
    return kind == LayerKind::Conv || kind == LayerKind::DWConv || kind == LayerKind::PWConv || kind == LayerKind::FC;
  }
  int groups() const { return kind == LayerKind::DWConv ? c_in : 1; }
  bool has_pw1() const { return kind == LayerKind::InvertedResidual && expand != 1.0; }
  bool has_residual() const { return kind == LayerKind::InvertedResidual && stride == 1 && c_in == c_out; }
  ConvParams params() const { return {stride, padding, groups()}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::string name;
  int in_c = 3;
  int in_h = 32;
  int in_w = 32;
  double width = 1.0;
  int num_classes = 0;
  std::vector<LayerSpec> layers;
  std::string weights;

  /// Index of the layer called `name`, or -1.
  int find(const std::string& layer_name) const {
    for (size_t i = 0; i < layers.size(); ++i)
      if (layers[i].name == layer_name) return static_cast<int>(i);
    return -1;
  }

  /// Block names in first-appearance order.
  std::vector<std::string> blocks() const {
    std::vector<std::string> out;
    for (const auto& l : layers)
      if (std::find(out.begin(), out.end(), l.block) == out.end()) out.push_back(l.block);
    return out;
  }

  /// Layer indices of the inverted residual blocks.
  std::vector<int> inverted_residuals() const {
    std::vector<int> out;
    for (size_t i = 0; i < layers.size(); ++i)
      if (layers[i].kind == LayerKind::InvertedResidual) out.push_back(static_cast<int>(i));
    return out;
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// ---------------------------------------------------------------- names

namespace detail {

template <class E>
struct EnumNames;

template <>
struct EnumNames<LayerKind> {
  static constexpr std::pair<LayerKind, const char*> table[] = {
      {LayerKind::Conv, "conv"},     {LayerKind::DWConv, "dwconv"},
      {LayerKind::PWConv, "pwconv"}, {LayerKind::InvertedResidual, "inverted_residual"},
      {LayerKind::ReLU, "relu"},     {LayerKind::Trunc, "trunc"},
      {LayerKind::Pool, "pool"},     {LayerKind::FC, "fc"}};
};
template <>
struct EnumNames<WinogradPolicy> {
  static constexpr std::pair<WinogradPolicy, const char*> table[] = {{WinogradPolicy::Auto, "auto"},
                                                                     {WinogradPolicy::Regular, "regular"},
                                                                     {WinogradPolicy::M2, "m2"},
                                                                     {WinogradPolicy::M4, "m4"}};
};
template <>
struct EnumNames<PoolOp> {
  static constexpr std::pair<PoolOp, const char*> table[] = {{PoolOp::Max, "max"}, {PoolOp::Avg, "avg"}};
};
template <>
struct EnumNames<ShortcutKind> {
  static constexpr std::pair<ShortcutKind, const char*> table[] = {{ShortcutKind::None, "none"},
                                                                   {ShortcutKind::Identity, "identity"},
                                                                   {ShortcutKind::OptionA, "option_a"},
                                                                   {ShortcutKind::Projection, "projection"}};
};

}  // namespace detail

template <class E>
const char* enum_name(E e) {
  for (const auto& [v, s] : detail::EnumNames<E>::table)
    if (v == e) return s;
  return "?";
}

template <class E>
std::optional<E> parse_enum(const std::string& s) {
  for (const auto& [v, n] : detail::EnumNames<E>::table)
    if (s == n) return v;
  return std::nullopt;
}

// ----------------------------------------------------------- validation

namespace detail {

[[noreturn]] inline void layer_error(const LayerSpec& l, size_t i, const std::string& what) {
  throw InputError("layer " + std::to_string(i) + " '" + l.name + "': " + what);
}

/// Sets `field` when it is unset (0) and checks it otherwise.
inline void fill_or_check(int& field, int expected, const char* label, const LayerSpec& l, size_t i) {
  if (field == 0) {
    field = expected;
  } else if (field != expected) {
    layer_error(l, i, std::string(label) + " is " + std::to_string(field) + " but the chain gives " +
                          std::to_string(expected));
  }
}

inline int out_extent(const LayerSpec& l, size_t i, int in, int r, int stride, int pad) {
  if (r <= 0 || stride <= 0 || pad < 0) layer_error(l, i, "r, stride must be positive and padding nonnegative");
  if (in + 2 * pad < r) layer_error(l, i, "kernel larger than padded input");
  return conv_out_size(in, r, stride, pad);
}

}  // namespace detail

/// Fills derived fields left at zero (c_in, h_in, w_in, h, w, hidden,
/// DW/pool c_out) and checks every given field against the chain. Errors
/// name the offending layer.
inline void normalize(NetworkSpec& net) {
  if (net.in_c <= 0 || net.in_h <= 0 || net.in_w <= 0) throw InputError("input shape must be positive");
  if (!(net.width > 0)) throw InputError("width multiplier must be positive");
  int c = net.in_c, h = net.in_h, w = net.in_w;
  std::map<std::string, size_t> seen;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    LayerSpec& l = net.layers[i];
    if (l.name.empty()) l.name = "layer" + std::to_string(i);
    if (l.block.empty()) l.block = l.name;
    if (!seen.emplace(l.name, i).second) detail::layer_error(l, i, "duplicate layer name");
    detail::fill_or_check(l.c_in, c, "c_in", l, i);
    detail::fill_or_check(l.h_in, h, "h_in", l, i);
    detail::fill_or_check(l.w_in, w, "w_in", l, i);
    int ho = h, wo = w;
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::DWConv:
      case LayerKind::PWConv:
        if (l.kind == LayerKind::PWConv && l.r != 1) detail::layer_error(l, i, "pointwise conv needs r = 1");
        if (l.kind == LayerKind::DWConv) detail::fill_or_check(l.c_out, l.c_in, "c_out", l, i);
        ho = detail::out_extent(l, i, h, l.r, l.stride, l.padding);
        wo = detail::out_extent(l, i, w, l.r, l.stride, l.padding);
        break;
      case LayerKind::FC:
        if (h != 1 || w != 1) detail::layer_error(l, i, "fully connected layer needs a 1x1 input");
        if (l.r != 1 || l.stride != 1 || l.padding != 0) detail::layer_error(l, i, "fully connected layer needs r = 1");
        break;
      case LayerKind::InvertedResidual:
        if (!(l.expand > 0)) detail::layer_error(l, i, "expand ratio must be positive");
        detail::fill_or_check(l.hidden, static_cast<int>(std::lround(l.c_in * l.expand)), "hidden", l, i);
        if (l.expand == 1.0 && l.hidden != l.c_in) detail::layer_error(l, i, "expand 1 needs hidden = c_in");
        ho = detail::out_extent(l, i, h, l.r, l.stride, l.padding);
        wo = detail::out_extent(l, i, w, l.r, l.stride, l.padding);
        break;
      case LayerKind::Pool:
        detail::fill_or_check(l.c_out, l.c_in, "c_out", l, i);
        ho = detail::out_extent(l, i, h, l.r, l.stride, l.padding);
        wo = detail::out_extent(l, i, w, l.r, l.stride, l.padding);
        break;
      case LayerKind::ReLU:
      case LayerKind::Trunc:
        detail::fill_or_check(l.c_out, l.c_in, "c_out", l, i);
        break;
    }
    if (l.c_out <= 0) detail::layer_error(l, i, "c_out must be positive");
    if (l.kind == LayerKind::DWConv && l.c_out != l.c_in) detail::layer_error(l, i, "depthwise conv needs c_out = c_in");
    detail::fill_or_check(l.h, ho, "h", l, i);
    detail::fill_or_check(l.w, wo, "w", l, i);

    const bool winograd = l.policy == WinogradPolicy::M2 || l.policy == WinogradPolicy::M4;
    if (winograd) {
      const bool eligible = l.kind == LayerKind::Conv || l.kind == LayerKind::DWConv ||
                            l.kind == LayerKind::InvertedResidual;
      if (!eligible || l.r != 3) detail::layer_error(l, i, "Winograd policy needs a 3x3 conv");
      if (l.stride > 2) detail::layer_error(l, i, "Winograd policy needs stride 1 or 2");
      if (l.policy == WinogradPolicy::M4 && l.stride != 1) detail::layer_error(l, i, "m4 is not available at stride 2");
    }

    const Shortcut& sc = l.shortcut;
    if (sc.kind != ShortcutKind::None) {
      if (l.kind == LayerKind::InvertedResidual) detail::layer_error(l, i, "inverted residual blocks carry their own residual");
      auto it = seen.find(sc.from);
      if (it == seen.end()) detail::layer_error(l, i, "shortcut source '" + sc.from + "' is not this or an earlier layer");
      const LayerSpec& src = net.layers[it->second];
      switch (sc.kind) {
        case ShortcutKind::Identity:
          if (src.c_in != l.c_out || src.h_in != l.h || src.w_in != l.w)
            detail::layer_error(l, i, "identity shortcut needs matching shapes");
          break;
        case ShortcutKind::OptionA:
        case ShortcutKind::Projection: {
          const int s = src.h_in / l.h;
          if (s < 1 || conv_out_size(src.h_in, 1, s, 0) != l.h || conv_out_size(src.w_in, 1, s, 0) != l.w)
            detail::layer_error(l, i, "shortcut spatial size does not subsample to the output");
          if (sc.kind == ShortcutKind::OptionA && (l.c_out < src.c_in || (l.c_out - src.c_in) % 2 != 0))
            detail::layer_error(l, i, "option-A shortcut needs an even channel increase");
          break;
        }
        case ShortcutKind::None:
          break;
      }
    }
    c = l.c_out;
    h = l.h;
    w = l.w;
  }
}

/// Subsampling stride of a shortcut into layer i.
inline int shortcut_stride(const NetworkSpec& net, size_t i) {
  const LayerSpec& l = net.layers[i];
  const LayerSpec& src = net.layers[static_cast<size_t>(net.find(l.shortcut.from))];
  return src.h_in / l.h;
}

// ----------------------------------------------------------------- json

using ordered_json = nlohmann::ordered_json;

namespace detail {

class JsonReader {
 public:
  JsonReader(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& what) const { throw InputError(path_ + ": " + what); }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  T get(const char* key, T fallback) const {
    used_.push_back(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T require(const char* key) const {
    used_.push_back(key);
    if (!j_.contains(key)) fail("missing field '" + std::string(key) + "'");
    return convert<T>(j_.at(key), key);
  }

  const ordered_json& child(const char* key) const {
    used_.push_back(key);
    if (!j_.contains(key)) fail("missing field '" + std::string(key) + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void no_unknown_fields() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(used_.begin(), used_.end(), it.key()) == used_.end()) fail("unknown field '" + it.key() + "'");
  }

 private:
  template <class T>
  T convert(const ordered_json& v, const char* key) const {
    const std::string where = "field '" + std::string(key) + "'";
    if constexpr (std::is_same_v<T, bool>) {
      if (v.is_boolean()) return v.get<bool>();
      if (v.is_number_integer() && (v.get<int64_t>() == 0 || v.get<int64_t>() == 1)) return v.get<int64_t>() == 1;
      fail(where + ": expected a boolean or 0/1");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(where + ": expected an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(where + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(where + ": expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_string()) fail(where + ": expected a string");
      const auto e = parse_enum<T>(v.get<std::string>());
      if (!e) fail(where + ": unknown value '" + v.get<std::string>() + "'");
      return *e;
    }
  }

  const ordered_json& j_;
  std::string path_;
  mutable std::vector<std::string> used_;
};

inline bool has_kernel(LayerKind k) {
  return k == LayerKind::Conv || k == LayerKind::DWConv || k == LayerKind::PWConv || k == LayerKind::Pool ||
         k == LayerKind::InvertedResidual;
}

}  // namespace detail

inline constexpr int kNetspecVersion = 1;

/// Canonical JSON: fixed key order, every derived field written out.
inline ordered_json to_json(const NetworkSpec& net) {
  ordered_json j;
  j["version"] = kNetspecVersion;
  j["name"] = net.name;
  j["input"] = {{"c", net.in_c}, {"h", net.in_h}, {"w", net.in_w}};
  j["width"] = net.width;
  j["num_classes"] = net.num_classes;
  ordered_json layers = ordered_json::array();
  for (const LayerSpec& l : net.layers) {
    ordered_json o;
    o["name"] = l.name;
    o["kind"] = enum_name(l.kind);
    o["block"] = l.block;
    o["c_in"] = l.c_in;
    o["c_out"] = l.c_out;
    o["h_in"] = l.h_in;
    o["w_in"] = l.w_in;
    o["h"] = l.h;
    o["w"] = l.w;
    if (detail::has_kernel(l.kind)) {
      o["r"] = l.r;
      o["stride"] = l.stride;
      o["padding"] = l.padding;
    }
    if (l.kind == LayerKind::InvertedResidual) {
      o["expand"] = l.expand;
      o["hidden"] = l.hidden;
    }
    if (l.kind == LayerKind::Pool) o["pool"] = enum_name(l.pool);
    if (l.kind != LayerKind::ReLU && l.kind != LayerKind::Trunc) o["alpha"] = l.alpha ? 1 : 0;
    if (l.is_conv() || l.kind == LayerKind::InvertedResidual) {
      o["policy"] = enum_name(l.policy);
      o["bn"] = l.bn;
    }
    if (l.shortcut.kind != ShortcutKind::None)
      o["shortcut"] = {{"kind", enum_name(l.shortcut.kind)}, {"from", l.shortcut.from}};
    if (!l.merged_from.empty()) o["merged_from"] = l.merged_from;
    layers.push_back(std::move(o));
  }
  j["layers"] = std::move(layers);
  if (!net.weights.empty()) j["weights"] = net.weights;
  return j;
}

/// Parses and normalizes a schema-v1 document. Derived fields may be
/// omitted; given ones must agree with the chain.
inline NetworkSpec from_json(const ordered_json& j) {
  detail::JsonReader top(j, "netspec");
  const int version = top.require<int>("version");
  if (version != kNetspecVersion) top.fail("unsupported version " + std::to_string(version));
  NetworkSpec net;
  net.name = top.get<std::string>("name", "");
  {
    detail::JsonReader in(top.child("input"), top.path("input"));
    net.in_c = in.require<int>("c");
    net.in_h = in.require<int>("h");
    net.in_w = in.get<int>("w", net.in_h);
    in.no_unknown_fields();
  }
  net.width = top.get<double>("width", 1.0);
  net.num_classes = top.get<int>("num_classes", 0);
  net.weights = top.get<std::string>("weights", "");
  const ordered_json& layers = top.child("layers");
  if (!layers.is_array()) top.fail("field 'layers': expected an array");
  for (size_t i = 0; i < layers.size(); ++i) {
    detail::JsonReader r(layers[i], "netspec.layers[" + std::to_string(i) + "]");
    LayerSpec l;
    l.name = r.get<std::string>("name", "");
    l.kind = r.require<LayerKind>("kind");
    l.block = r.get<std::string>("block", "");
    l.c_in = r.get<int>("c_in", 0);
    l.c_out = r.get<int>("c_out", 0);
    l.h_in = r.get<int>("h_in", 0);
    l.w_in = r.get<int>("w_in", 0);
    l.h = r.get<int>("h", 0);
    l.w = r.get<int>("w", 0);
    const int default_r = l.kind == LayerKind::InvertedResidual ? 3 : 1;
    l.r = r.get<int>("r", default_r);
    l.stride = r.get<int>("stride", 1);
    l.padding = r.get<int>("padding", l.kind == LayerKind::InvertedResidual ? (l.r - 1) / 2 : 0);
    l.expand = r.get<double>("expand", 1.0);
    l.hidden = r.get<int>("hidden", 0);
    l.pool = r.get<PoolOp>("pool", PoolOp::Max);
    l.alpha = r.get<bool>("alpha", false);
    l.policy = r.get<WinogradPolicy>("policy", WinogradPolicy::Regular);
    l.bn = r.get<bool>("bn", l.kind != LayerKind::FC);
    l.merged_from = r.get<std::string>("merged_from", "");
    if (r.has("shortcut")) {
      detail::JsonReader s(r.child("shortcut"), r.path("shortcut"));
      l.shortcut.kind = s.require<ShortcutKind>("kind");
      l.shortcut.from = s.require<std::string>("from");
      s.no_unknown_fields();
    }
    r.no_unknown_fields();
    net.layers.push_back(std::move(l));
  }
  top.no_unknown_fields();
  normalize(net);
  return net;
}

inline NetworkSpec parse_netspec(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("netspec is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline std::string dump_netspec(const NetworkSpec& net) { return to_json(net).dump(2) + "\n"; }

inline NetworkSpec load_netspec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open netspec '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return parse_netspec(text);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void save_netspec(const NetworkSpec& net, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write netspec '" + path + "'");
  f << dump_netspec(net);
}

// -------------------------------------------------------------- weights

/// Filter plus per-output-channel bias (batch norm already folded in).
struct ConvWeights {
  Tensor<double> w;
  std::vector<double> b;

  friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

/// Convolutions owned by one layer: main conv then projection shortcut for
/// plain layers; pw1 (when expanded), dw, pw2 for inverted residual blocks.
struct LayerWeights {
  std::vector<ConvWeights> convs;

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

using NetworkWeights = std::vector<LayerWeights>;

/// Shape and role of one convolution inside a layer.
struct ConvSlot {
  Shape4 filter;
  int groups = 1;
  bool bn = true;
  bool zero_bias = false;  // biases that would break exact merging
};

inline std::vector<ConvSlot> conv_slots(const NetworkSpec& net, size_t i) {
  const LayerSpec& l = net.layers[i];
  std::vector<ConvSlot> out;
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::PWConv:
    case LayerKind::FC:
      out.push_back({{l.c_out, l.c_in, l.r, l.r}, 1, l.bn, false});
      break;
    case LayerKind::DWConv:
      out.push_back({{l.c_out, 1, l.r, l.r}, l.c_in, l.bn, false});
      break;
    case LayerKind::InvertedResidual:
      if (l.has_pw1()) out.push_back({{l.hidden, l.c_in, 1, 1}, 1, l.bn, true});
      out.push_back({{l.hidden, 1, l.r, l.r}, l.hidden, l.bn, false});
      out.push_back({{l.c_out, l.hidden, 1, 1}, 1, l.bn, false});
      break;
    default:
      break;
  }
  if (l.shortcut.kind == ShortcutKind::Projection) {
    const LayerSpec& src = net.layers[static_cast<size_t>(net.find(l.shortcut.from))];
    out.push_back({{l.c_out, src.c_in, 1, 1}, 1, l.bn, false});
  }
  return out;
}

/// Parameter count of the reference model: filters plus two parameters per
/// output channel for each batch norm, or one bias when there is none.
inline int64_t parameter_count(const NetworkSpec& net) {
  int64_t total = 0;
  for (size_t i = 0; i < net.layers.size(); ++i)
    for (const ConvSlot& s : conv_slots(net, i))
      total += static_cast<int64_t>(s.filter.size()) + (s.bn ? 2 : 1) * static_cast<int64_t>(s.filter.n);
  return total;
}

/// Seeded He-uniform filters and small biases, snapped to the fixed-point
/// grid of `cfg`.
inline NetworkWeights random_weights(const NetworkSpec& net, uint64_t seed, const RingConfig& cfg) {
  std::mt19937_64 rng(seed);
  NetworkWeights out(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    for (const ConvSlot& s : conv_slots(net, i)) {
      const double fan_in = static_cast<double>(s.filter.c) * s.filter.h * s.filter.w;
      std::uniform_real_distribution<double> wd(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
      std::uniform_real_distribution<double> bd(-0.05, 0.05);
      ConvWeights cw{Tensor<double>(s.filter), std::vector<double>(static_cast<size_t>(s.filter.n), 0.0)};
      for (size_t k = 0; k < cw.w.size(); ++k) cw.w[k] = quantize(wd(rng), cfg);
      for (auto& b : cw.b) b = s.zero_bias ? 0.0 : quantize(bd(rng), cfg);
      out[i].convs.push_back(std::move(cw));
    }
  }
  return out;
}

inline void check_weights(const NetworkSpec& net, const NetworkWeights& w) {
  if (w.size() != net.layers.size()) throw InputError("weights cover " + std::to_string(w.size()) + " layers, net has " +
                                                      std::to_string(net.layers.size()));
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const auto slots = conv_slots(net, i);
    if (slots.size() != w[i].convs.size()) detail::layer_error(net.layers[i], i, "wrong number of weight tensors");
    for (size_t s = 0; s < slots.size(); ++s) {
      if (w[i].convs[s].w.shape() != slots[s].filter || w[i].convs[s].b.size() != static_cast<size_t>(slots[s].filter.n))
        detail::layer_error(net.layers[i], i, "weight tensor " + std::to_string(s) + " has the wrong shape");
    }
  }
}

/// Float count of the sidecar file for `net`.
inline size_t weight_floats(const NetworkSpec& net) {
  size_t n = 0;
  for (size_t i = 0; i < net.layers.size(); ++i)
    for (const ConvSlot& s : conv_slots(net, i)) n += s.filter.size() + static_cast<size_t>(s.filter.n);
  return n;
}

/// Sidecar: little-endian float32, layer by layer, filter then bias.
inline void write_weights(const std::string& path, const NetworkSpec& net, const NetworkWeights& w) {
  check_weights(net, w);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write weights '" + path + "'");
  auto put = [&](double v) {
    const float x = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  for (const auto& lw : w)
    for (const auto& cw : lw.convs) {
      for (size_t k = 0; k < cw.w.size(); ++k) put(cw.w[k]);
      for (double b : cw.b) put(b);
    }
}

inline NetworkWeights read_weights(const std::string& path, const NetworkSpec& net) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open weights '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const size_t want = weight_floats(net);
  if (bytes.size() != 4 * want)
    throw InputError("weights '" + path + "' hold " + std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(4 * want));
  size_t pos = 0;
  auto get = [&]() {
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    const uint32_t bits = uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 24;
    pos += 4;
    float x;
    std::memcpy(&x, &bits, 4);
    return static_cast<double>(x);
  };
  NetworkWeights out(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i)
    for (const ConvSlot& s : conv_slots(net, i)) {
      ConvWeights cw{Tensor<double>(s.filter), std::vector<double>(static_cast<size_t>(s.filter.n))};
      for (size_t k = 0; k < cw.w.size(); ++k) cw.w[k] = get();
      for (auto& b : cw.b) b = get();
      out[i].convs.push_back(std::move(cw));
    }
  return out;
}

// -------------------------------------------------------------- presets

/// Channel rounding for width multipliers: nearest multiple of 8, never
/// dropping more than 10%.
inline int make_divisible(double v, int divisor = 8) {
  int nv = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
  if (nv < 0.9 * v) nv += divisor;
  return nv;
}

namespace detail {

struct Builder {
  NetworkSpec net;
  Dataset data;
  int c, h, w;

  Builder(std::string name, Dataset d, double width, int classes) : data(d) {
    net.name = std::move(name);
    net.in_c = 3;
    net.in_h = net.in_w = d == Dataset::Cifar ? 32 : 224;
    net.width = width;
    net.num_classes = classes > 0 ? classes : (d == Dataset::Cifar ? 100 : 1000);
    c = 3;
    h = w = net.in_h;
  }

  WinogradPolicy policy(int r, int stride) const {
    if (r != 3) return WinogradPolicy::Regular;
    if (data == Dataset::Cifar || stride != 1) return WinogradPolicy::M2;
    return WinogradPolicy::M4;
  }

  LayerSpec& add(LayerSpec l) {
    l.c_in = c;
    l.h_in = h;
    l.w_in = w;
    if (l.kind == LayerKind::FC) {
      l.h = l.w = 1;
    } else {
      l.h = conv_out_size(h, l.r, l.stride, l.padding);
      l.w = conv_out_size(w, l.r, l.stride, l.padding);
    }
    if (l.kind == LayerKind::InvertedResidual) l.hidden = static_cast<int>(std::lround(l.c_in * l.expand));
    if (l.is_conv() || l.kind == LayerKind::InvertedResidual) l.policy = policy(l.r, l.stride);
    if (l.kind == LayerKind::FC) l.bn = false;
    c = l.c_out;
    h = l.h;
    w = l.w;
    net.layers.push_back(std::move(l));
    return net.layers.back();
  }

  LayerSpec& conv(const std::string& name, const std::string& block, int c_out, int r, int stride, bool relu) {
    LayerSpec l;
    l.name = name;
    l.block = block;
    l.kind = r == 1 ? LayerKind::PWConv : LayerKind::Conv;
    l.c_out = c_out;
    l.r = r;
    l.stride = stride;
    l.padding = (r - 1) / 2;
    l.alpha = relu;
    return add(std::move(l));
  }

  void head() {
    LayerSpec p;
    p.name = "avgpool";
    p.block = "head";
    p.kind = LayerKind::Pool;
    p.pool = PoolOp::Avg;
    p.c_out = c;
    p.r = h;
    p.stride = h;
    add(std::move(p));
    LayerSpec fc;
    fc.name = "fc";
    fc.block = "head";
    fc.kind = LayerKind::FC;
    fc.c_out = net.num_classes;
    add(std::move(fc));
  }
};

inline NetworkSpec resnet18(Dataset d, int classes) {
  Builder b("resnet18", d, 1.0, classes);
  if (d == Dataset::Cifar) {
    b.conv("stem", "stem", 64, 3, 1, true);
  } else {
    b.conv("stem", "stem", 64, 7, 2, true);
    LayerSpec p;
    p.name = "maxpool";
    p.block = "stem";
    p.kind = LayerKind::Pool;
    p.pool = PoolOp::Max;
    p.c_out = 64;
    p.r = 3;
    p.stride = 2;
    p.padding = 1;
    b.add(std::move(p));
  }
  const int widths[] = {64, 128, 256, 512};
  for (int s = 0; s < 4; ++s)
    for (int k = 0; k < 2; ++k) {
      const std::string blk = "s" + std::to_string(s + 1) + "b" + std::to_string(k + 1);
      const int stride = (k == 0 && s > 0) ? 2 : 1;
      const bool project = stride != 1 || b.c != widths[s];
      b.conv(blk + ".conv1", blk, widths[s], 3, stride, true);
      LayerSpec& c2 = b.conv(blk + ".conv2", blk, widths[s], 3, 1, true);
      c2.shortcut = {project ? ShortcutKind::Projection : ShortcutKind::Identity, blk + ".conv1"};
    }
  b.head();
  return b.net;
}

inline NetworkSpec resnet32(Dataset d, int classes) {
  if (d != Dataset::Cifar) throw InputError("preset resnet32 is defined for CIFAR input only");
  Builder b("resnet32", d, 1.0, classes);
  b.conv("stem", "stem", 16, 3, 1, true);
  const int widths[] = {16, 32, 64};
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 5; ++k) {
      const std::string blk = "s" + std::to_string(s + 1) + "b" + std::to_string(k + 1);
      const int stride = (k == 0 && s > 0) ? 2 : 1;
      const bool pad = stride != 1 || b.c != widths[s];
      b.conv(blk + ".conv1", blk, widths[s], 3, stride, true);
      LayerSpec& c2 = b.conv(blk + ".conv2", blk, widths[s], 3, 1, true);
      c2.shortcut = {pad ? ShortcutKind::OptionA : ShortcutKind::Identity, blk + ".conv1"};
    }
  b.head();
  return b.net;
}

inline NetworkSpec mobilenetv2(Dataset d, double width, int classes, const std::string& name) {
  Builder b(name, d, width, classes);
  struct Stage {
    int t, c, n, s;
  };
  std::vector<Stage> stages = {{1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 3, 2}, {6, 64, 4, 2},
                               {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}};
  if (d == Dataset::Cifar) stages[1].s = 1;
  b.conv("stem", "stem", make_divisible(32 * width), 3, d == Dataset::Cifar ? 1 : 2, true);
  int idx = 0;
  for (const Stage& st : stages) {
    const int c_out = make_divisible(st.c * width);
    for (int i = 0; i < st.n; ++i) {
      const std::string blk = "b" + std::to_string(++idx);
      LayerSpec l;
      l.name = blk;
      l.block = blk;
      l.kind = LayerKind::InvertedResidual;
      l.c_out = c_out;
      l.r = 3;
      l.stride = i == 0 ? st.s : 1;
      l.padding = 1;
      l.expand = st.t;
      l.alpha = true;
      b.add(std::move(l));
    }
  }
  b.conv("last", "head", make_divisible(1280 * std::max(1.0, width)), 1, 1, true);
  b.head();
  return b.net;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"resnet18", "resnet32", "mobilenetv2-w0.75", "mobilenetv2-w1.0", "mobilenetv2-w1.4"};
}

inline std::optional<Dataset> parse_dataset(const std::string& s) {
  if (s == "cifar") return Dataset::Cifar;
  if (s == "imagenet") return Dataset::ImageNet;
  return std::nullopt;
}

/// Published architectures. `classes` <= 0 picks 100 for CIFAR and 1000 for
/// ImageNet. Default Winograd policy: m2 on CIFAR, m4 on ImageNet, m2 at
/// stride 2 and regular for non-3x3 convs.
inline NetworkSpec preset(const std::string& name, Dataset d, int classes = 0) {
  NetworkSpec net;
  if (name == "resnet18") {
    net = detail::resnet18(d, classes);
  } else if (name == "resnet32") {
    net = detail::resnet32(d, classes);
  } else if (name.rfind("mobilenetv2-w", 0) == 0) {
    const std::string w = name.substr(13);
    if (w != "0.75" && w != "1.0" && w != "1.4") throw InputError("unknown preset '" + name + "'");
    net = detail::mobilenetv2(d, std::stod(w), classes, name);
  } else {
    throw InputError("unknown preset '" + name + "'");
  }
  normalize(net);
  return net;
}

}  // namespace copriv

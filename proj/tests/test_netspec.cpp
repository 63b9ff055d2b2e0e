// Copyright 2026 The CoPriv-Sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "copriv/netspec.hpp"

using namespace copriv;

namespace {

int count_kind(const NetworkSpec& net, LayerKind k) {
  int n = 0;
  for (const auto& l : net.layers) n += l.kind == k;
  return n;
}

int count_shortcuts(const NetworkSpec& net) {
  int n = 0;
  for (const auto& l : net.layers) n += l.shortcut.kind != ShortcutKind::None;
  return n;
}

void expect_within_pct(int64_t got, int64_t ref, double pct) {
  EXPECT_LE(std::abs(static_cast<double>(got - ref)) / static_cast<double>(ref), pct / 100.0)
      << "got " << got << " reference " << ref;
}

}  // namespace

TEST(Presets, ResNet18HasEightBasicBlocksOfThreeByThreeConvs) {
  for (Dataset d : {Dataset::Cifar, Dataset::ImageNet}) {
    const NetworkSpec net = preset("resnet18", d);
    EXPECT_EQ(count_shortcuts(net), 8);
    int block_convs = 0;
    for (const auto& l : net.layers) {
      if (l.block != "stem" && l.block != "head" && l.kind == LayerKind::Conv) {
        EXPECT_EQ(l.r, 3) << l.name;
        ++block_convs;
      }
    }
    EXPECT_EQ(block_convs, 16);
  }
}

TEST(Presets, ResNet32HasFifteenBlocksInThreeStages) {
  const NetworkSpec net = preset("resnet32", Dataset::Cifar);
  EXPECT_EQ(count_shortcuts(net), 15);
  EXPECT_EQ(net.blocks().size(), 1u + 15u + 1u);
  EXPECT_EQ(net.layers[static_cast<size_t>(net.find("s3b5.conv2"))].h, 8);
  EXPECT_THROW(preset("resnet32", Dataset::ImageNet), InputError);
}

TEST(Presets, MobileNetV2ImageNetShape) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::ImageNet);
  EXPECT_EQ(count_kind(net, LayerKind::InvertedResidual), 17);
  EXPECT_EQ(net.layers[0].stride, 2);
  EXPECT_EQ(net.layers[0].h, 112);
  const LayerSpec& b17 = net.layers[static_cast<size_t>(net.find("b17"))];
  EXPECT_EQ(b17.c_out, 320);
  EXPECT_EQ(b17.h, 7);
  EXPECT_EQ(net.layers[static_cast<size_t>(net.find("last"))].c_out, 1280);
  EXPECT_FALSE(net.layers[static_cast<size_t>(net.find("b1"))].has_pw1());
}

TEST(Presets, WidthMultiplierRoundsToMultiplesOfEight) {
  EXPECT_EQ(make_divisible(32 * 0.75), 24);
  EXPECT_EQ(make_divisible(16 * 0.75), 16);  // 12 rounds up to 16
  EXPECT_EQ(make_divisible(24 * 0.75), 24);  // 18 -> 16 is below 90%, so 24
  EXPECT_EQ(make_divisible(320 * 1.4), 448);
  const NetworkSpec w075 = preset("mobilenetv2-w0.75", Dataset::ImageNet);
  const NetworkSpec w14 = preset("mobilenetv2-w1.4", Dataset::ImageNet);
  EXPECT_EQ(w075.layers[0].c_out, 24);
  EXPECT_EQ(w075.layers[static_cast<size_t>(w075.find("last"))].c_out, 1280);
  EXPECT_EQ(w14.layers[static_cast<size_t>(w14.find("last"))].c_out, 1792);
  for (const auto& l : w075.layers)
    if (l.kind == LayerKind::InvertedResidual) {
      EXPECT_EQ(l.c_out % 8, 0) << l.name;
    }
}

TEST(Presets, ParameterCountsMatchReferenceModels) {
  expect_within_pct(parameter_count(preset("resnet18", Dataset::ImageNet)), 11689512, 1.0);
  expect_within_pct(parameter_count(preset("mobilenetv2-w1.0", Dataset::ImageNet)), 3504872, 1.0);
  expect_within_pct(parameter_count(preset("resnet32", Dataset::Cifar, 10)), 464154, 1.0);
}

TEST(Presets, DefaultPolicies) {
  for (const auto& l : preset("resnet18", Dataset::Cifar).layers) {
    if (l.r == 3 && l.is_conv()) {
      EXPECT_EQ(l.policy, WinogradPolicy::M2) << l.name;
    }
  }
  for (const auto& l : preset("resnet18", Dataset::ImageNet).layers) {
    if (!l.is_conv()) continue;
    const WinogradPolicy want =
        l.r != 3 ? WinogradPolicy::Regular : (l.stride == 1 ? WinogradPolicy::M4 : WinogradPolicy::M2);
    EXPECT_EQ(l.policy, want) << l.name;
  }
}

TEST(Presets, UnknownNameRejected) {
  EXPECT_THROW(preset("vgg16", Dataset::Cifar), InputError);
  EXPECT_THROW(preset("mobilenetv2-w0.5", Dataset::Cifar), InputError);
}

TEST(Validation, AllPresetsChain) {
  for (const auto& name : preset_names())
    for (Dataset d : {Dataset::Cifar, Dataset::ImageNet}) {
      if (name == "resnet32" && d == Dataset::ImageNet) continue;
      NetworkSpec net = preset(name, d);
      NetworkSpec copy = net;
      EXPECT_NO_THROW(normalize(copy)) << name;
      EXPECT_EQ(copy, net);
      EXPECT_EQ(net.layers.back().h, 1);
      EXPECT_EQ(net.layers.back().c_out, net.num_classes);
    }
}

TEST(Validation, MalformedChainNamesLayer) {
  NetworkSpec net = preset("resnet32", Dataset::Cifar);
  net.layers[5].c_in = 17;
  try {
    normalize(net);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(net.layers[5].name), std::string::npos) << e.what();
  }
}

TEST(Validation, PolicyLegality) {
  NetworkSpec net = preset("resnet18", Dataset::Cifar);
  const size_t down = static_cast<size_t>(net.find("s2b1.conv1"));
  net.layers[down].policy = WinogradPolicy::M4;
  EXPECT_THROW(normalize(net), InputError);
  net.layers[down].policy = WinogradPolicy::M2;
  EXPECT_NO_THROW(normalize(net));
  const size_t fc = static_cast<size_t>(net.find("fc"));
  net.layers[fc].policy = WinogradPolicy::M2;
  EXPECT_THROW(normalize(net), InputError);
}

TEST(Json, MinimalDocumentFillsDerivedFields) {
  const NetworkSpec net = parse_netspec(R"({
    "version": 1, "name": "tiny", "input": {"c": 1, "h": 8},
    "layers": [
      {"name": "c1", "kind": "conv", "c_out": 4, "r": 3, "padding": 1, "alpha": 1, "policy": "m2"},
      {"name": "pool", "kind": "pool", "pool": "avg", "r": 8, "stride": 8},
      {"name": "fc", "kind": "fc", "c_out": 3}
    ]})");
  ASSERT_EQ(net.layers.size(), 3u);
  EXPECT_EQ(net.in_w, 8);
  EXPECT_EQ(net.layers[0].c_in, 1);
  EXPECT_EQ(net.layers[0].h, 8);
  EXPECT_EQ(net.layers[1].c_out, 4);
  EXPECT_EQ(net.layers[1].h, 1);
  EXPECT_EQ(net.layers[2].c_in, 4);
  EXPECT_FALSE(net.layers[2].bn);
}

TEST(Json, CanonicalRoundTrip) {
  for (const auto& name : {"resnet18", "resnet32", "mobilenetv2-w0.75"}) {
    const NetworkSpec net = preset(name, Dataset::Cifar);
    const std::string canon = dump_netspec(net);
    const NetworkSpec back = parse_netspec(canon);
    EXPECT_EQ(back, net) << name;
    EXPECT_EQ(dump_netspec(back), canon) << name;
  }
}

TEST(Json, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "copriv_netspec_test";
  std::filesystem::create_directories(dir);
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  save_netspec(net, (dir / "n.json").string());
  EXPECT_EQ(load_netspec((dir / "n.json").string()), net);
  std::filesystem::remove_all(dir);
}

TEST(Json, Diagnostics) {
  auto message = [](const std::string& text) {
    try {
      parse_netspec(text);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("{").find("not valid JSON"), std::string::npos);
  EXPECT_NE(message(R"({"version": 2, "input": {"c":1,"h":4}, "layers": []})").find("version"), std::string::npos);
  const std::string bad_field =
      message(R"({"version": 1, "input": {"c":1,"h":4}, "layers": [{"kind": "conv", "c_out": "x"}]})");
  EXPECT_NE(bad_field.find("layers[0]"), std::string::npos) << bad_field;
  EXPECT_NE(bad_field.find("c_out"), std::string::npos) << bad_field;
  const std::string unknown =
      message(R"({"version": 1, "input": {"c":1,"h":4}, "layers": [{"kind": "conv", "c_out": 2, "colour": 1}]})");
  EXPECT_NE(unknown.find("colour"), std::string::npos) << unknown;
  const std::string kind = message(R"({"version": 1, "input": {"c":1,"h":4}, "layers": [{"kind": "lstm"}]})");
  EXPECT_NE(kind.find("lstm"), std::string::npos) << kind;
}

TEST(Json, EmptyNetwork) {
  const NetworkSpec net = parse_netspec(R"({"version": 1, "input": {"c": 3, "h": 32}, "layers": []})");
  EXPECT_TRUE(net.layers.empty());
  EXPECT_EQ(parameter_count(net), 0);
}

TEST(Weights, SeededAndOnGrid) {
  const RingConfig cfg;
  const NetworkSpec net = preset("resnet32", Dataset::Cifar, 10);
  const NetworkWeights a = random_weights(net, 7, cfg);
  const NetworkWeights b = random_weights(net, 7, cfg);
  const NetworkWeights c = random_weights(net, 8, cfg);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  check_weights(net, a);
  for (const auto& lw : a)
    for (const auto& cw : lw.convs)
      for (size_t i = 0; i < cw.w.size(); ++i) EXPECT_EQ(cw.w[i], quantize(cw.w[i], cfg));
}

TEST(Weights, PointwiseExpansionBiasIsZero) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  const NetworkWeights w = random_weights(net, 3, RingConfig{});
  const size_t b2 = static_cast<size_t>(net.find("b2"));
  ASSERT_EQ(w[b2].convs.size(), 3u);
  for (double v : w[b2].convs[0].b) EXPECT_EQ(v, 0.0);
  const size_t b1 = static_cast<size_t>(net.find("b1"));
  EXPECT_EQ(w[b1].convs.size(), 2u);
}

TEST(Weights, SidecarRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "copriv_weights_test.bin").string();
  const NetworkSpec net = preset("resnet18", Dataset::Cifar, 10);
  const NetworkWeights w = random_weights(net, 11, RingConfig{});
  write_weights(path, net, w);
  EXPECT_EQ(std::filesystem::file_size(path), 4 * weight_floats(net));
  // Grid values at scale 12 with |w| < 1 are exact in float32.
  EXPECT_EQ(read_weights(path, net), w);
  const NetworkSpec other = preset("resnet32", Dataset::Cifar, 10);
  EXPECT_THROW(read_weights(path, other), InputError);
  std::filesystem::remove(path);
}

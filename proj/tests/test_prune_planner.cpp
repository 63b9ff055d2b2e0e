// Copyright 2026 The CoPriv-Sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "copriv/prune_planner.hpp"

using namespace copriv;

namespace {

NetworkSpec single_block(int c, int e, int hw, int stride = 1) {
  NetworkSpec net;
  net.name = "one";
  net.in_c = c;
  net.in_h = net.in_w = hw;
  LayerSpec l;
  l.name = "blk";
  l.kind = LayerKind::InvertedResidual;
  l.c_out = c;
  l.r = 3;
  l.stride = stride;
  l.padding = 1;
  l.expand = e;
  l.policy = WinogradPolicy::M2;
  net.layers.push_back(l);
  normalize(net);
  return net;
}

// Exhaustive argmax of sum(score - mu*delta) over all s-subsets; among
// equal sums the lexicographically smallest index set wins.
std::vector<int> brute_force(const std::vector<double>& score, const std::vector<double>& delta, int s, double mu) {
  const int n = static_cast<int>(score.size());
  double best = -INFINITY;
  std::vector<int> best_set;
  std::vector<int> idx;
  std::function<void(int, double)> rec = [&](int from, double sum) {
    if (static_cast<int>(idx.size()) == s) {
      if (sum > best) {
        best = sum;
        best_set = idx;
      }
      return;
    }
    for (int i = from; i < n; ++i) {
      idx.push_back(i);
      rec(i + 1, sum + score[static_cast<size_t>(i)] - mu * delta[static_cast<size_t>(i)]);
      idx.pop_back();
    }
  };
  rec(0, 0.0);
  std::vector<int> alpha(static_cast<size_t>(n), 0);
  for (int i : best_set) alpha[static_cast<size_t>(i)] = 1;
  return alpha;
}

}  // namespace

TEST(CommDelta, ExpandedBlockIsPositive) { EXPECT_GT(comm_delta(single_block(16, 6, 14), 0), 0.0); }

TEST(CommDelta, DegenerateExpandOneBlockIsNonNegative) {
  EXPECT_GE(comm_delta(single_block(16, 1, 1), 0), 0.0);
}

TEST(CommDelta, NonBlockLayerRejected) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  EXPECT_THROW(comm_delta(net, static_cast<size_t>(net.find("fc"))), InputError);
  EXPECT_THROW(comm_delta(net, 999), InputError);
}

TEST(CommDelta, LaterBlocksCostMoreToKeep) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  auto mean = [&](int from, int to) {
    double s = 0;
    for (int b = from; b <= to; ++b) s += comm_delta(net, static_cast<size_t>(net.find("b" + std::to_string(b))));
    return s / (to - from + 1);
  };
  EXPECT_GT(mean(12, 17), mean(2, 7));
}

TEST(Plan, MuZeroIsTopByScore) {
  const std::vector<double> score{0.3, 0.9, 0.1, 0.7, 0.5};
  const std::vector<double> delta{5, 1, 3, 2, 4};
  EXPECT_EQ(select_top(score, delta, 2, 0.0), (std::vector<int>{0, 1, 0, 1, 0}));
  EXPECT_EQ(select_top(score, delta, 5, 0.0), (std::vector<int>{1, 1, 1, 1, 1}));
  EXPECT_EQ(select_top(score, delta, 0, 0.0), (std::vector<int>{0, 0, 0, 0, 0}));
}

TEST(Plan, UniformScoresKeepSmallestDeltas) {
  const std::vector<double> score(6, 1.0);
  const std::vector<double> delta{9, 2, 7, 2, 1, 8};
  EXPECT_EQ(select_top(score, delta, 3, 0.5), (std::vector<int>{0, 1, 0, 1, 1, 0}));
}

TEST(Plan, TiesGoToLowerIndex) {
  EXPECT_EQ(select_top({1, 1, 1, 1}, {0, 0, 0, 0}, 2, 1.0), (std::vector<int>{1, 1, 0, 0}));
}

TEST(Plan, RangeAndFiniteChecks) {
  EXPECT_THROW(select_top({1, 2}, {0, 0}, 3, 0.0), InputError);
  EXPECT_THROW(select_top({1, 2}, {0, 0}, -1, 0.0), InputError);
  EXPECT_THROW(select_top({1, NAN}, {0, 0}, 1, 0.0), InputError);
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  EXPECT_THROW(plan(net, std::vector<double>(3, 1.0), 1, 0.0), InputError);
}

TEST(Plan, MatchesBruteForce) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int s = static_cast<int>(rng() % static_cast<uint64_t>(n + 1));
    std::vector<double> score(static_cast<size_t>(n)), delta(static_cast<size_t>(n));
    for (auto& v : score) v = u(rng);
    for (auto& v : delta) v = u(rng) * 1e9;
    const double mu = u(rng) * 1e-9;
    EXPECT_EQ(select_top(score, delta, s, mu), brute_force(score, delta, s, mu)) << "instance " << inst;
  }
}

TEST(Plan, BudgetAndScaleInvariance) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> score(17);
  for (auto& v : score) v = u(rng);
  const AlphaPlan p = plan(net, score, 8, 1e-9);
  EXPECT_EQ(p.kept(), 8);
  std::vector<double> scaled = score;
  for (auto& v : scaled) v *= 7.5;
  const AlphaPlan q = plan(net, scaled, 8, 7.5e-9);
  EXPECT_EQ(p.alpha, q.alpha);
}

TEST(ApplyPlan, AllOnesLeavesNetUnchanged) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  const AlphaPlan p = plan(net, std::vector<double>(17, 1.0), 17, 0.0);
  EXPECT_EQ(apply_plan(net, p), net);
}

TEST(ApplyPlan, AllZerosMakesEveryBlockDense) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  NetworkWeights w = random_weights(net, 5, RingConfig{});
  const AlphaPlan p = plan(net, std::vector<double>(17, 1.0), 0, 0.0);
  const NetworkSpec out = apply_plan(net, p, &w);
  EXPECT_TRUE(out.inverted_residuals().empty());
  for (int i : net.inverted_residuals()) {
    const LayerSpec& l = out.layers[static_cast<size_t>(i)];
    EXPECT_EQ(l.kind, LayerKind::Conv);
    EXPECT_EQ(l.merged_from, l.name);
    EXPECT_GT(winograd_m(l), 0) << l.name;
    EXPECT_EQ(w[static_cast<size_t>(i)].convs.size(), 1u);
  }
  check_weights(out, w);
}

TEST(ApplyPlan, HalfBudgetLowersCifarTotal) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  const std::vector<double> score(17, 1.0);
  const NetworkSpec half = apply_plan(net, plan(net, score, 8, 1e-9));
  const NetworkSpec full = apply_plan(net, plan(net, score, 17, 1e-9));
  const auto pol = NetworkPolicy::WinogradAuto;
  EXPECT_LT(network_cost(half, pol).modeled().grand, network_cost(full, pol).modeled().grand);
}

TEST(ApplyPlan, ReluSitesOnPlainNets) {
  const NetworkSpec net = preset("resnet32", Dataset::Cifar, 10);
  const std::vector<int> cand = prune_candidates(net);
  EXPECT_EQ(cand.size(), 31u);
  const AlphaPlan p = plan(net, std::vector<double>(cand.size(), 1.0), 10, 1.0);
  for (double d : p.delta) EXPECT_GT(d, 0.0);
  const NetworkSpec out = apply_plan(net, p);
  EXPECT_EQ(prune_candidates(out).size(), 10u);
}

TEST(Scores, ParseByNameOrIndex) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  std::string text = "[";
  for (int b = 1; b <= 17; ++b) {
    if (b > 1) text += ",";
    text += b % 2 ? R"({"block_id": "b)" + std::to_string(b) + R"(", "score": )" + std::to_string(b) + "}"
                  : R"({"block_id": )" + std::to_string(b - 1) + R"(, "score": )" + std::to_string(b) + "}";
  }
  text += "]";
  const std::vector<double> s = parse_scores(text, net);
  ASSERT_EQ(s.size(), 17u);
  for (int b = 1; b <= 17; ++b) EXPECT_EQ(s[static_cast<size_t>(b - 1)], b);
  EXPECT_THROW(parse_scores(R"([{"block_id": "fc", "score": 1}])", net), InputError);
  EXPECT_THROW(parse_scores(R"([{"block_id": "b1", "score": 1}])", net), InputError);
  EXPECT_THROW(parse_scores("{}", net), InputError);
}

TEST(Scores, PlanJsonRoundTrip) {
  const NetworkSpec net = preset("mobilenetv2-w1.0", Dataset::Cifar);
  std::vector<double> score(17);
  for (size_t i = 0; i < score.size(); ++i) score[i] = static_cast<double>(i % 5);
  const AlphaPlan p = plan(net, score, 6, 0.0);
  const AlphaPlan back = plan_from_json(nlohmann::json::parse(to_json(p, net).dump()), net);
  EXPECT_EQ(back.alpha, p.alpha);
  EXPECT_EQ(back.budget, 6);
}

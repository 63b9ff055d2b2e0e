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

// copriv_cli: communication planning and two-party simulation.
// Exit codes: 0 success, 1 internal protocol failure, 2 input error,
// 3 budget guard.

#include <CLI11.hpp>
#include <iostream>

#include "copriv/commands.hpp"

using namespace copriv;

namespace {

struct Flags {
  std::string net, policy = "winograd-auto", out, format = "csv,json,svg";
  int l = RingConfig{}.l, scale = RingConfig{}.scale, lambda = RingConfig{}.lambda;
  double k_ot = CostConstants{}.k_ot, c_relu = CostConstants{}.c_relu, c_trunc = CostConstants{}.c_trunc;
  uint64_t seed = 1;

  RunConfig resolve() const {
    RunConfig rc;
    rc.net = net;
    const auto p = parse_policy(policy);
    if (!p) throw InputError("unknown policy '" + policy + "' (regular, winograd-ewmm, winograd-gemm, winograd-auto)");
    rc.policy = *p;
    rc.cfg.l = l;
    rc.cfg.scale = scale;
    rc.cfg.lambda = lambda;
    rc.cfg.validate();
    rc.constants = {k_ot, c_relu, c_trunc};
    rc.constants.validate();
    rc.seed = seed;
    rc.out = out;
    rc.formats = parse_formats(format);
    return rc;
  }
};

void add_common(CLI::App* cmd, Flags& f, bool reports = true) {
  cmd->add_option("--net", f.net, "netspec file or preset name[:cifar|:imagenet[:classes]]")->required();
  cmd->add_option("--policy", f.policy, "regular | winograd-ewmm | winograd-gemm | winograd-auto");
  cmd->add_option("--l", f.l, "ring bit width");
  cmd->add_option("--scale", f.scale, "fractional bits");
  cmd->add_option("--lambda", f.lambda, "security parameter");
  cmd->add_option("--k-ot", f.k_ot, "helper-data multiplier");
  cmd->add_option("--c-relu", f.c_relu, "ring elements per ReLU");
  cmd->add_option("--c-trunc", f.c_trunc, "ring elements per truncation");
  cmd->add_option("--seed", f.seed, "seed for weights, inputs and shares");
  cmd->add_option("--out", f.out, "output directory (default: $COPRIV_OUT_DIR or .)");
  if (reports) cmd->add_option("--format", f.format, "comma list of csv, json, svg");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-party secure inference simulator and communication planner"};
  app.require_subcommand(1);
  Flags f;
  std::string merged_at, scores, budget, plan_path, weights, transcript, name, dataset = "cifar", preset_out;
  double mu = kDefaultMu;
  int classes = 0;

  auto* plan_cmd = app.add_subcommand("plan", "cost-model report");
  add_common(plan_cmd, f);
  plan_cmd->add_option("--merged-at", merged_at, "budget=X: merge blocks outside the budget first");
  plan_cmd->add_option("--scores", scores, "block importance scores (JSON)");
  plan_cmd->add_option("--mu", mu, "communication weight");

  auto* sim_cmd = app.add_subcommand("simulate", "run the two-party engine layer by layer");
  add_common(sim_cmd, f);
  sim_cmd->add_option("--weights", weights, "float32 weight sidecar (default: seeded random)");
  sim_cmd->add_option("--transcript", transcript, "write a replayable transcript here");

  auto* rep_cmd = app.add_subcommand("reparam", "merge the zero-alpha blocks of a plan");
  add_common(rep_cmd, f, false);
  rep_cmd->add_option("--plan", plan_path, "plan file from prune-plan")->required();
  rep_cmd->add_option("--weights", weights, "float32 weight sidecar (default: seeded random)");

  auto* prune_cmd = app.add_subcommand("prune-plan", "choose which blocks keep their ReLUs");
  add_common(prune_cmd, f, false);
  prune_cmd->add_option("--scores", scores, "block importance scores (JSON; default uniform)");
  prune_cmd->add_option("--budget", budget, "blocks to keep: a count or a fraction")->required();
  prune_cmd->add_option("--mu", mu, "communication weight");

  auto* preset_cmd = app.add_subcommand("preset", "write a preset netspec");
  preset_cmd->add_option("name", name, "resnet18 | resnet32 | mobilenetv2-w0.75 | -w1.0 | -w1.4")->required();
  preset_cmd->add_option("--dataset", dataset, "cifar | imagenet");
  preset_cmd->add_option("--classes", classes, "output classes (default 100 / 1000)");
  preset_cmd->add_option("--out", preset_out, "file (default: stdout)");

  auto* stats_cmd = app.add_subcommand("transcript-stats", "replay the accounting of a transcript");
  stats_cmd->add_option("--transcript", transcript, "transcript file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*plan_cmd) cmd_plan(f.resolve(), std::cout, merged_at, scores, mu);
    if (*sim_cmd) cmd_simulate(f.resolve(), std::cout, weights, transcript);
    if (*rep_cmd) cmd_reparam(f.resolve(), std::cout, plan_path, weights);
    if (*prune_cmd) cmd_prune_plan(f.resolve(), std::cout, scores, budget, mu);
    if (*preset_cmd) cmd_preset(name, dataset, classes, preset_out, std::cout);
    if (*stats_cmd) cmd_transcript_stats(transcript, std::cout);
  } catch (const BudgetError& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

// The command layer behind copriv_cli. Each command reads its inputs,
// writes its files under RunConfig::out and prints a short summary.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "copriv/cost_model.hpp"
#include "copriv/inference.hpp"
#include "copriv/netspec.hpp"
#include "copriv/prune_planner.hpp"
#include "copriv/reparam.hpp"
#include "copriv/report.hpp"

namespace copriv {

inline constexpr const char* kOutDirEnv = "COPRIV_OUT_DIR";
inline constexpr double kDefaultMu = 1e-6;

struct RunConfig {
  std::string net;
  NetworkPolicy policy = NetworkPolicy::WinogradAuto;
  RingConfig cfg{};
  CostConstants constants{};
  uint64_t seed = 1;
  std::string out;
  std::set<std::string> formats{"csv", "json", "svg"};

  /// --out, else the environment override, else the working directory.
  std::filesystem::path out_dir() const {
    if (!out.empty()) return out;
    if (const char* e = std::getenv(kOutDirEnv); e && *e) return e;
    return ".";
  }
};

inline std::set<std::string> parse_formats(const std::string& list) {
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string f;
  while (std::getline(ss, f, ',')) {
    if (f.empty()) continue;
    if (f != "csv" && f != "json" && f != "svg") throw InputError("unknown format '" + f + "' (csv, json, svg)");
    out.insert(f);
  }
  if (out.empty()) throw InputError("--format needs at least one of csv, json, svg");
  return out;
}

/// A netspec file, or a preset written name[:cifar|:imagenet[:classes]].
inline NetworkSpec load_net(const std::string& arg) {
  if (arg.empty()) throw InputError("--net is required");
  if (std::filesystem::exists(arg)) return load_netspec(arg);
  std::vector<std::string> parts;
  std::stringstream ss(arg);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  const auto names = preset_names();
  if (parts.empty() || std::find(names.begin(), names.end(), parts[0]) == names.end())
    throw InputError("--net '" + arg + "' is neither a file nor a preset");
  Dataset d = Dataset::Cifar;
  if (parts.size() > 1) {
    const auto parsed = parse_dataset(parts[1]);
    if (!parsed) throw InputError("unknown dataset '" + parts[1] + "' (cifar, imagenet)");
    d = *parsed;
  }
  int classes = 0;
  if (parts.size() > 2) {
    try {
      classes = std::stoi(parts[2]);
    } catch (const std::exception&) {
      throw InputError("bad class count '" + parts[2] + "'");
    }
  }
  if (parts.size() > 3) throw InputError("--net '" + arg + "' has too many fields");
  return preset(parts[0], d, classes);
}

/// Budget as a count ("8") or a fraction of the candidates ("0.5").
inline int resolve_budget(const std::string& v, int candidates) {
  std::string s = v;
  if (s.rfind("budget=", 0) == 0) s = s.substr(7);
  double x = 0;
  size_t used = 0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("bad budget '" + v + "'");
  }
  if (used != s.size() || !std::isfinite(x) || x < 0) throw InputError("bad budget '" + v + "'");
  if (s.find('.') != std::string::npos) {
    if (x > 1) throw InputError("fractional budget '" + v + "' must be at most 1");
    return static_cast<int>(std::floor(x * candidates + 1e-9));
  }
  if (x > candidates)
    throw InputError("budget " + s + " exceeds the " + std::to_string(candidates) + " prunable blocks");
  return static_cast<int>(x);
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path().empty() ? std::filesystem::path(".") : p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw InputError("failed writing '" + p.string() + "'");
}

inline void write_report(const RunConfig& rc, const CommReport& rep, const std::string& stem,
                         const std::optional<ordered_json>& extra = std::nullopt) {
  const auto dir = rc.out_dir();
  if (rc.formats.count("csv")) write_text(dir / (stem + ".csv"), to_csv(rep));
  if (rc.formats.count("json")) {
    ordered_json j = to_json(rep);
    if (extra) j["simulation"] = *extra;
    write_text(dir / (stem + ".json"), j.dump(2) + "\n");
  }
  if (rc.formats.count("svg")) write_text(dir / (stem + ".svg"), render_svg(rep));
}

inline void print_totals(std::ostream& os, const char* label, const CommTotals& t) {
  os << label << ": online " << t.online << " B, preprocessing " << t.preprocessing << " B, total " << t.grand
     << " B\n";
}

inline std::vector<double> scores_or_uniform(const std::string& path, const NetworkSpec& net) {
  if (!path.empty()) return load_scores(path, net);
  return std::vector<double>(prune_candidates(net).size(), 1.0);
}

// ------------------------------------------------------------ commands

/// Cost-model report. With merged_at, blocks outside the budget are merged
/// first and the unmerged total is printed alongside.
inline CommReport cmd_plan(const RunConfig& rc, std::ostream& os, const std::string& merged_at = "",
                           const std::string& scores = "", double mu = kDefaultMu) {
  NetworkSpec net = load_net(rc.net);
  const CommReport base = network_cost(net, rc.policy, rc.cfg, rc.constants);
  CommReport rep = base;
  if (!merged_at.empty()) {
    const int n = static_cast<int>(prune_candidates(net).size());
    const AlphaPlan p = plan(net, scores_or_uniform(scores, net), resolve_budget(merged_at, n), mu, rc.policy, rc.cfg,
                             rc.constants);
    net = apply_plan(net, p);
    rep = network_cost(net, rc.policy, rc.cfg, rc.constants);
    os << "kept " << p.kept() << " of " << n << " blocks\n";
    print_totals(os, "unmerged", base.modeled());
  }
  print_totals(os, "modeled", rep.modeled());
  os << "conv bytes: " << rep.op_total(kOpConv) << "\n";
  write_report(rc, rep, "plan");
  return rep;
}

inline SimResult cmd_simulate(const RunConfig& rc, std::ostream& os, const std::string& weights = "",
                              const std::string& transcript = "", Schedule schedule = Schedule::Threaded) {
  const NetworkSpec net = load_net(rc.net);
  SimOptions o;
  o.policy = rc.policy;
  o.cfg = rc.cfg;
  o.constants = rc.constants;
  o.seed = rc.seed;
  o.schedule = schedule;
  o.transcript = !transcript.empty();
  const uint64_t mults = multiplication_count(net);
  if (mults > o.max_mults)
    throw BudgetError("network needs " + std::to_string(mults) + " multiplications, limit is " +
                      std::to_string(o.max_mults));
  const NetworkWeights w = weights.empty() ? random_weights(net, rc.seed, rc.cfg) : read_weights(weights, net);
  const SimResult r = simulate(net, w, random_input(net, rc.seed, rc.cfg), o);
  write_report(rc, r.report, "simulate", summary_json(r));
  if (!transcript.empty()) write_transcript(transcript, r.header, r.transcript);
  print_totals(os, "measured", *r.report.measured());
  print_totals(os, "modeled", r.report.modeled());
  os << "max deviation from plaintext: " << r.max_ulp_deviation << " ulp (" << r.max_abs_deviation << ")\n";
  return r;
}

struct ReparamEntry {
  std::string block;
  double max_rel_error = 0;
};

/// Merge the plan's zero-alpha blocks; report each block's relative error
/// against its linearized original on a seeded input.
inline std::vector<ReparamEntry> cmd_reparam(const RunConfig& rc, std::ostream& os, const std::string& plan_path,
                                             const std::string& weights = "") {
  const NetworkSpec net = load_net(rc.net);
  std::ifstream f(plan_path);
  if (!f) throw InputError("cannot open plan '" + plan_path + "'");
  nlohmann::json pj;
  try {
    pj = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("plan: not valid JSON: ") + e.what());
  }
  const AlphaPlan p = plan_from_json(pj, net);
  NetworkWeights w = weights.empty() ? random_weights(net, rc.seed, rc.cfg) : read_weights(weights, net);
  const NetworkWeights original = w;
  const NetworkSpec merged = apply_plan(net, p, &w);

  std::vector<ReparamEntry> out;
  std::mt19937_64 rng(rc.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ordered_json blocks = ordered_json::array();
  for (size_t j = 0; j < p.layers.size(); ++j) {
    const size_t i = static_cast<size_t>(p.layers[j]);
    const LayerSpec& l = net.layers[i];
    if (p.alpha[j] || l.kind != LayerKind::InvertedResidual) continue;
    InvertedResidualBlock b = block_from_layer(l, original[i]);
    b.relu_alpha = false;
    Tensor<double> x({1, l.c_in, l.h_in, l.w_in});
    for (auto& v : x.vec()) v = u(rng);
    const Tensor<double> ref = block_forward(b, x);
    const MergedConv m{w[i].convs[0], l.stride, (l.r - 1) / 2};
    const Tensor<double> got = merged_forward(m, x);
    double num = 0, den = 0;
    for (size_t k = 0; k < ref.size(); ++k) {
      num = std::max(num, std::fabs(got[k] - ref[k]));
      den = std::max(den, std::fabs(ref[k]));
    }
    out.push_back({l.name, den > 0 ? num / den : num});
    os << l.name << ": max relative error " << out.back().max_rel_error << "\n";
    blocks.push_back({{"block_id", l.name}, {"max_rel_error", out.back().max_rel_error}});
  }
  const auto dir = rc.out_dir();
  save_netspec(merged, (dir / "merged.json").string());
  write_weights((dir / "merged.weights.bin").string(), merged, w);
  ordered_json rep;
  rep["network"] = net.name;
  rep["merged_blocks"] = blocks;
  write_text(dir / "reparam.json", rep.dump(2) + "\n");
  os << "merged " << out.size() << " blocks\n";
  return out;
}

inline AlphaPlan cmd_prune_plan(const RunConfig& rc, std::ostream& os, const std::string& scores,
                                const std::string& budget, double mu) {
  const NetworkSpec net = load_net(rc.net);
  const int n = static_cast<int>(prune_candidates(net).size());
  const AlphaPlan p =
      plan(net, scores_or_uniform(scores, net), resolve_budget(budget, n), mu, rc.policy, rc.cfg, rc.constants);
  ordered_json j;
  j["network"] = net.name;
  j["policy"] = policy_name(rc.policy);
  const ordered_json body = to_json(p, net);
  for (const auto& [k, v] : body.items()) j[k] = v;
  const auto dir = rc.out_dir();
  write_text(dir / "plan.json", j.dump(2) + "\n");
  save_netspec(apply_plan(net, p), (dir / "pruned.json").string());
  os << "kept " << p.kept() << " of " << n << " blocks:";
  for (size_t k = 0; k < p.layers.size(); ++k)
    if (p.alpha[k]) os << " " << net.layers[static_cast<size_t>(p.layers[k])].name;
  os << "\n";
  return p;
}

inline void cmd_preset(const std::string& name, const std::string& dataset, int classes, const std::string& out,
                       std::ostream& os) {
  const auto d = parse_dataset(dataset);
  if (!d) throw InputError("unknown dataset '" + dataset + "' (cifar, imagenet)");
  const NetworkSpec net = preset(name, *d, classes);
  if (out.empty()) {
    os << dump_netspec(net);
  } else {
    save_netspec(net, out);
    os << "wrote " << out << " (" << parameter_count(net) << " parameters)\n";
  }
}

inline TranscriptTotals cmd_transcript_stats(const std::string& path, std::ostream& os) {
  const auto [h, recs] = read_transcript(path);
  const TranscriptTotals t = transcript_totals(h, recs);
  os << "records " << t.records << "\nonline " << t.online_bytes << " B\npreprocessing " << t.preprocessing_bytes
     << " B\ntotal " << t.online_bytes + t.preprocessing_bytes << " B\n";
  return t;
}

}  // namespace copriv

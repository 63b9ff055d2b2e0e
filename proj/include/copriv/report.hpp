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

// Static SVG stacked bars: one bar per block, online panel on top and
// total panel below, segments conv / trunc / ReLU (and helper data).

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "copriv/cost_model.hpp"

namespace copriv {

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Segment {
  const char* label;
  const char* colour;
  uint64_t BlockBreakdown::*field;
};

inline std::string svg_panel(const std::vector<BlockBreakdown>& blocks, const std::vector<Segment>& segs,
                             const std::string& title, double top, double height, double left, double bar_w) {
  uint64_t peak = 0;
  for (const auto& b : blocks) {
    uint64_t s = 0;
    for (const auto& g : segs) s += b.*(g.field);
    peak = std::max(peak, s);
  }
  const double mb_peak = static_cast<double>(peak) / 1e6;
  std::string out;
  out += "<text x=\"" + fmt("%.1f", left) + "\" y=\"" + fmt("%.1f", top - 8) + "\" font-size=\"13\">" +
         xml_escape(title) + " (peak " + fmt("%.3f", mb_peak) + " MB)</text>\n";
  out += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", top + height) + "\" x2=\"" +
         fmt("%.1f", left + bar_w * static_cast<double>(blocks.size())) + "\" y2=\"" + fmt("%.1f", top + height) +
         "\" stroke=\"#333\"/>\n";
  for (size_t i = 0; i < blocks.size(); ++i) {
    const BlockBreakdown& b = blocks[i];
    const double x = left + bar_w * static_cast<double>(i) + 2;
    double y = top + height;
    for (const auto& g : segs) {
      const uint64_t v = b.*(g.field);
      const double h = peak ? height * static_cast<double>(v) / static_cast<double>(peak) : 0.0;
      y -= h;
      out += "<rect x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.2f", y) + "\" width=\"" + fmt("%.1f", bar_w - 4) +
             "\" height=\"" + fmt("%.2f", h) + "\" fill=\"" + g.colour + "\"><title>" + xml_escape(b.block) + " " +
             g.label + ": " + std::to_string(v) + " bytes</title></rect>\n";
    }
    out += "<text x=\"" + fmt("%.1f", x + (bar_w - 4) / 2) + "\" y=\"" + fmt("%.1f", top + height + 12) +
           "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-45 " + fmt("%.1f", x + (bar_w - 4) / 2) + " " +
           fmt("%.1f", top + height + 12) + ")\">" + xml_escape(b.block) + "</text>\n";
  }
  return out;
}

}  // namespace detail

/// Block-wise stacked bars of online and total bytes.
inline std::string render_svg(const CommReport& rep) {
  const std::vector<BlockBreakdown> blocks = block_breakdown(rep);
  const std::vector<detail::Segment> online{{"conv", "#4e79a7", &BlockBreakdown::conv_online},
                                            {"trunc", "#f28e2b", &BlockBreakdown::trunc_online},
                                            {"relu", "#e15759", &BlockBreakdown::relu_online}};
  std::vector<detail::Segment> total = online;
  total.insert(total.begin(), {"conv helper data", "#76b7b2", &BlockBreakdown::conv_preprocessing});

  const double left = 20, bar_w = 24, panel_h = 180;
  const double width = std::max(360.0, left * 2 + bar_w * static_cast<double>(blocks.size()));
  const double height = 2 * panel_h + 190;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt("%.0f", width) +
                    "\" height=\"" + detail::fmt("%.0f", height) + "\" font-family=\"sans-serif\">\n";
  out += "<text x=\"" + detail::fmt("%.1f", left) + "\" y=\"18\" font-size=\"15\">" +
         detail::xml_escape(rep.network + " / " + rep.policy) + "</text>\n";
  out += detail::svg_panel(blocks, online, "online", 50, panel_h, left, bar_w);
  out += detail::svg_panel(blocks, total, "total", 50 + panel_h + 70, panel_h, left, bar_w);
  double lx = left;
  const double ly = height - 16;
  for (const auto& g : total) {
    out += "<rect x=\"" + detail::fmt("%.1f", lx) + "\" y=\"" + detail::fmt("%.1f", ly - 9) +
           "\" width=\"10\" height=\"10\" fill=\"" + g.colour + "\"/>";
    out += "<text x=\"" + detail::fmt("%.1f", lx + 14) + "\" y=\"" + detail::fmt("%.1f", ly) + "\" font-size=\"11\">" +
           g.label + "</text>\n";
    lx += 30 + 7.0 * static_cast<double>(std::string(g.label).size());
  }
  out += "</svg>\n";
  return out;
}

}  // namespace copriv

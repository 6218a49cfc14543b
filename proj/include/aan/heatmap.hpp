#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "aan/common.hpp"

namespace aan::explain {

inline std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Self-contained attention heat-map: one span per token, background opacity
// proportional to the token's share of the maximum combined weight. No
// external resources.
inline void export_heatmap(const std::vector<std::string>& tokens,
                           const std::vector<double>& weights,
                           const std::string& predicted_label,
                           const std::string& title, const std::string& path) {
  check(tokens.size() == weights.size(), "export_heatmap: token/weight length mismatch");
  double max_w = 0.0;
  for (double w : weights) max_w = std::max(max_w, w);
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write heat-map: " + path);
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
      << "<title>" << html_escape(title) << "</title>\n"
      << "<style>\n"
      << "body { font-family: sans-serif; margin: 2em; max-width: 60em; }\n"
      << ".tok { padding: 1px 2px; border-radius: 3px; }\n"
      << "h1 { font-size: 1.1em; }\n"
      << "</style></head><body>\n"
      << "<h1>" << html_escape(title) << " &mdash; predicted: <b>"
      << html_escape(predicted_label) << "</b></h1>\n<p>\n";
  char buf[32];
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    double opacity = max_w > 0.0 ? weights[t] / max_w : 0.0;
    std::snprintf(buf, sizeof(buf), "%.4f", opacity);
    out << "<span class=\"tok\" style=\"background: rgba(255,96,0," << buf
        << ")\" title=\"" << weights[t] << "\">" << html_escape(tokens[t])
        << "</span> ";
  }
  out << "\n</p></body></html>\n";
}

}  // namespace aan::explain

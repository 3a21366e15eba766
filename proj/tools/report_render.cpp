#include "report_render.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "q2t/error.hpp"
#include "q2t/key_value.hpp"

namespace q2t::cli {

namespace {

std::vector<std::string> nonblank_lines(std::string_view text) {
  std::vector<std::string> out;
  for (auto& line : split(text, '\n')) {
    auto t = trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

CsvKind detect_csv_kind(std::string_view text, std::string_view origin) {
  const auto lines = nonblank_lines(text);
  if (lines.empty()) throw Error(ErrorKind::kNoRows, fmt::format("{}: no rows", origin));
  const auto header = split(lines.front(), ',');
  if (!header.empty() && header.front() == "type") return CsvKind::kEval;
  if (header.size() >= 5 && header[1] == "A_m") return CsvKind::kSweep;
  throw Error(ErrorKind::kParse, fmt::format("{}: unrecognised CSV header '{}'", origin, lines.front()));
}

SweepSeries parse_sweep_csv(std::string_view text, std::string_view origin) {
  const auto lines = nonblank_lines(text);
  if (lines.size() < 2) throw Error(ErrorKind::kNoRows, fmt::format("{}: no rows", origin));
  const auto header = split(lines.front(), ',');
  SweepSeries s;
  s.axis = header.front();
  std::size_t metric_cols = 0;
  for (std::size_t c = 1; c < header.size() && header[c] != "error"; ++c) {
    s.names.push_back(header[c]);
    ++metric_cols;
  }
  s.points.resize(metric_cols);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() < metric_cols + 1) {
      throw Error(ErrorKind::kParse, fmt::format("{}:{}: expected {} fields", origin, i + 1, metric_cols + 1));
    }
    const bool failed = cells.size() > metric_cols + 1 && !trim(cells[metric_cols + 1]).empty();
    s.x.push_back(parse_double(cells[0], origin));
    for (std::size_t c = 0; c < metric_cols; ++c) {
      const auto cell = trim(cells[c + 1]);
      if (failed || cell.empty()) {
        s.points[c].push_back(std::nullopt);
      } else {
        s.points[c].push_back(parse_double(cell, origin));
      }
    }
  }
  return s;
}

std::string render_sweep_svg(const SweepSeries& s, std::string_view title) {
  constexpr double W = 640, H = 420, left = 70, right = 130, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmin = s.x.empty() ? 0.0 : *std::min_element(s.x.begin(), s.x.end());
  double xmax = s.x.empty() ? 1.0 : *std::max_element(s.x.begin(), s.x.end());
  if (xmax <= xmin) { xmin -= 0.5; xmax += 0.5; }
  double ymax = 0.0;
  for (const auto& col : s.points)
    for (const auto& p : col)
      if (p) ymax = std::max(ymax, *p * 100.0);
  ymax = ymax <= 0.0 ? 1.0 : std::ceil(ymax / 5.0) * 5.0;

  const auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return top + ph - y / ymax * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     left + pw / 2, escape(title));
  out += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
      left, top + ph, left + pw, top);

  for (int i = 0; i <= 5; ++i) {
    const double y = ymax * i / 5.0;
    out += fmt::format(
        "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n"
        "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
        left, py(y), left + pw, left - 6, py(y) + 4, y);
  }
  for (double x : s.x) {
    out += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", px(x),
                       top + ph + 18, x);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     H - 16, escape(s.axis));
  out += fmt::format(
      "<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">MRR (%)</text>\n",
      top + ph / 2);

  for (std::size_t c = 0; c < s.points.size(); ++c) {
    const char* color = kColors[c % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const auto& p = s.points[c][i];
      if (!p) continue;
      pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(*p * 100.0));
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(s.x[i]),
                         py(*p * 100.0), color);
    }
    if (!pts.empty()) {
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                         pts, color);
    }
    const double ly = top + 10 + 20.0 * static_cast<double>(c);
    out += fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n"
        "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
        left + pw + 15, ly, left + pw + 40, color, left + pw + 46, ly + 4, escape(s.names[c]));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace q2t::cli

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "panerf_cli/cli.hpp"

namespace panerf::cli {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (lo > hi) lo = 0, hi = 1;
    if (lo == hi) lo -= 0.5, hi += 0.5;
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

std::string frame(const std::string& title, const std::string& x_label, const std::string& y_label,
                  const Range& y) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", x0, y0, x1);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", x0, y0, y1);
  for (int k = 0; k <= 4; ++k) {
    const double v = y.lo + (y.hi - y.lo) * k / 4.0;
    const double py = y.map(v, y0, y1);
    s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", x0 - 6, py + 4, v);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2,
                   kHeight - 12, escape(x_label));
  s += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                   (y0 + y1) / 2, escape(y_label));
  return s;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series) {
  Range x, y;
  for (const auto& s : series) {
    for (const auto& [px, py] : s.points) {
      x.add(px);
      y.add(py);
    }
  }
  x.settle();
  y.settle();
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string out = frame(title, x_label, y_label, y);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    std::string path;
    for (const auto& [px, py] : s.points) {
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      path += fmt::format("{}{:.2f},{:.2f}", path.empty() ? "" : " ", x.map(px, x0, x1), y.map(py, y0, y1));
    }
    out += fmt::format("<g class=\"series\" data-name=\"{}\">\n", escape(s.name));
    if (!path.empty()) {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", colour, path);
    }
    for (const auto& [px, py] : s.points) {
      const bool finite = std::isfinite(px) && std::isfinite(py);
      out += fmt::format(
          "<circle class=\"point\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\" data-x=\"{:.17g}\" "
          "data-y=\"{:.17g}\"/>\n",
          finite ? x.map(px, x0, x1) : x0, finite ? y.map(py, y0, y1) : y1, colour, px, py);
    }
    out += "</g>\n";
    out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", x1 - 150, kTop + 14 * (i + 1),
                       colour, escape(s.name));
  }
  return out + "</svg>\n";
}

std::string svg_bar_plot(const std::string& title, const std::string& y_label,
                         const std::vector<std::pair<std::string, double>>& bars) {
  Range y;
  y.add(0.0);
  for (const auto& b : bars) y.add(b.second);
  y.settle();
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string out = frame(title, "view", y_label, y);
  const double slot = (x1 - x0) / double(std::max<std::size_t>(bars.size(), 1));
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& [label, value] = bars[i];
    const bool finite = std::isfinite(value);
    const double top = finite ? y.map(value, y0, y1) : y1;
    const double base = y.map(std::clamp(0.0, y.lo, y.hi), y0, y1);
    const double bx = x0 + slot * (i + 0.15);
    out += fmt::format(
        "<rect class=\"bar\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
        "data-label=\"{}\" data-value=\"{:.17g}\"/>\n",
        bx, std::min(top, base), slot * 0.7, std::abs(base - top), kPalette[0], escape(label), value);
    if (!finite) {
      out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">inf</text>\n",
                         bx + slot * 0.35, y1 - 4);
    }
    if (bars.size() <= 30) {
      out += fmt::format(
          "<text x=\"{0:.2f}\" y=\"{1:.2f}\" text-anchor=\"end\" font-size=\"10\" "
          "transform=\"rotate(-45 {0:.2f} {1:.2f})\">{2}</text>\n",
          bx + slot * 0.35, y0 + 12, escape(label));
    }
  }
  return out + "</svg>\n";
}

}  // namespace panerf::cli

#include "hbreset/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hbreset::svg {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& options) {
  const double inf = std::numeric_limits<double>::infinity();
  auto usable = [&](double y) { return std::isfinite(y) && (!options.log_y || y > 0.0); };
  auto ty = [&](double y) { return options.log_y ? std::log10(y) : y; };

  double x_min = inf, x_max = -inf, y_min = inf, y_max = -inf;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, ty(s.y[i]));
      y_max = std::max(y_max, ty(s.y[i]));
    }
  }
  if (!(x_min <= x_max)) x_min = 0.0, x_max = 1.0;
  if (!(y_min <= y_max)) y_min = 0.0, y_max = 1.0;
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;
  if (options.log_y) y_min = std::floor(y_min), y_max = std::ceil(y_max);

  const double left = 80, right = 160, top = 40, bottom = 60;
  const double w = options.width - left - right;
  const double h = options.height - top - bottom;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * w; };
  auto py = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(options.title) << "</text>\n";
  out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 5.0;
    out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + h + 16) << "\" text-anchor=\"middle\">"
        << tick_label(xv) << "</text>\n";
  }
  const int y_ticks = options.log_y ? static_cast<int>(std::min(10.0, y_max - y_min)) : 5;
  for (int i = 0; i <= y_ticks; ++i) {
    const double yv = y_min + (y_max - y_min) * i / y_ticks;
    const std::string label = options.log_y ? "1e" + tick_label(yv) : tick_label(yv);
    out << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + w) << "\" y1=\"" << num(py(yv)) << "\" y2=\""
        << num(py(yv)) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << label
        << "</text>\n";
  }
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(options.height - 16) << "\" text-anchor=\"middle\">"
      << escape(options.x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << num(top + h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(options.y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    std::string points;
    auto flush = [&]() {
      if (!points.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
            << "\"/>\n";
      }
      points.clear();
    };
    const auto& sr = series[s];
    for (std::size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i) {
      if (!usable(sr.y[i]) || !std::isfinite(sr.x[i])) {
        flush();
        continue;
      }
      points += num(px(sr.x[i])) + "," + num(py(ty(sr.y[i]))) + " ";
    }
    flush();
    const double ly = top + 16.0 * (static_cast<double>(s) + 1.0);
    out << "<line x1=\"" << num(left + w + 10) << "\" x2=\"" << num(left + w + 30) << "\" y1=\"" << num(ly - 4)
        << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(left + w + 34) << "\" y=\"" << num(ly) << "\">" << escape(sr.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace hbreset::svg

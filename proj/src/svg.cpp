#include "grelu/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace grelu {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                    "#bcbd22", "#17becf"};

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

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void write_svg_chart(std::ostream& out, const std::vector<Series>& series,
                     const ChartOptions& opts) {
  const double left = 70, right = 150, top = 40, bottom = 50;
  const double pw = opts.width - left - right;
  const double ph = opts.height - top - bottom;

  auto ty = [&](double y) { return opts.log_y ? std::log10(y) : y; };
  auto usable = [&](double y) { return std::isfinite(y) && (!opts.log_y || y > 0.0); };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x0 == x1) x1 = x0 + 1;
  if (y0 == y1) y0 -= 0.5, y1 += 0.5;
  if (opts.log_y) y0 = std::floor(y0), y1 = std::ceil(y1);

  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width
      << "\" height=\"" << opts.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opts.title.empty()) {
    out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-size=\"14\">" << escape(opts.title) << "</text>\n";
  }
  out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    out << "<line x1=\"" << fmt(px(xv)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\""
        << fmt(px(xv)) << "\" y2=\"" << fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(top + ph + 18)
        << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
  }
  const int ysteps = opts.log_y ? static_cast<int>(std::min(y1 - y0, 10.0)) : 5;
  for (int i = 0; i <= ysteps; ++i) {
    const double yv = y0 + (y1 - y0) * i / std::max(ysteps, 1);
    const double shown = opts.log_y ? std::pow(10.0, yv) : yv;
    out << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py(yv)) << "\" x2=\""
        << fmt(left + pw) << "\" y2=\"" << fmt(py(yv))
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py(yv) + 4)
        << "\" text-anchor=\"end\">" << tick_label(shown) << "</text>\n";
  }
  out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << opts.height - 10
      << "\" text-anchor=\"middle\">" << escape(opts.x_label) << "</text>\n";
  out << "<text transform=\"translate(16 " << fmt(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(opts.y_label)
      << (opts.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    const Series& ser = series[s];
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      if (!usable(ser.y[i]) || !std::isfinite(ser.x[i])) continue;
      if (!first) out << ' ';
      out << fmt(px(ser.x[i])) << ',' << fmt(py(ty(ser.y[i])));
      first = false;
    }
    out << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << fmt(left + pw + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(left + pw + 30) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(left + pw + 35) << "\" y=\"" << fmt(ly + 4) << "\">"
        << escape(ser.label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace grelu

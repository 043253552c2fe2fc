#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grelu {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label = "iteration";
  std::string y_label = "loss";
  bool log_y = false;
  int width = 720;
  int height = 440;
};

// Line chart with axes, ticks and a legend. On a log axis, points with
// y <= 0 or non-finite y are dropped.
void write_svg_chart(std::ostream& out, const std::vector<Series>& series,
                     const ChartOptions& opts);

}  // namespace grelu

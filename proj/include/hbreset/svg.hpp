#pragma once

#include <string>
#include <vector>

namespace hbreset::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  int width = 720;
  int height = 480;
};

/// Minimal SVG line chart. Points with non-finite y (or y <= 0 on a log
/// axis) split the polyline. Output depends only on the inputs.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace hbreset::svg

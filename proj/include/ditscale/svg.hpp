#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ditscale {

struct PlotSeries
{
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool line = false; // polyline instead of markers
};

struct Plot
{
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

std::string render_svg(Plot const &plot);

// Writes <stem>.svg and the plotted numbers to <stem>.csv (series,x,y).
void write_plot(std::filesystem::path const &stem, Plot const &plot, std::string const &csv_comment = {});

} // namespace ditscale

#include "ditscale/svg.hpp"

#include "ditscale/errors.hpp"
#include "ditscale/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ditscale {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 36, kBottom = 50;
constexpr char const *kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(std::string const &s)
{
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

struct Axis
{
  bool log = false;
  double lo = 0, hi = 1;
  double px0 = 0, px1 = 1;

  double t(double v) const { return log ? std::log10(v) : v; }
  double map(double v) const { return px0 + (t(v) - lo) / (hi - lo) * (px1 - px0); }
};

Axis make_axis(std::vector<double> const &vals, bool log, double px0, double px1)
{
  Axis a{log, 0, 1, px0, px1};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : vals) {
    if (!std::isfinite(v) || (log && v <= 0)) { continue; }
    lo = std::min(lo, a.t(v));
    hi = std::max(hi, a.t(v));
  }
  if (!std::isfinite(lo)) { lo = 0, hi = 1; }
  if (hi - lo < 1e-12) { lo -= 0.5, hi += 0.5; }
  double const pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

} // namespace

std::string render_svg(Plot const &plot)
{
  std::vector<double> xs, ys;
  for (auto const &s : plot.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  Axis const ax = make_axis(xs, plot.log_x, kLeft, kWidth - kRight);
  Axis const ay = make_axis(ys, plot.log_y, kHeight - kBottom, kTop);

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(plot.title)
    << "</text>\n"
    << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
    << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    double const tx = ax.lo + (ax.hi - ax.lo) * k / 4.0;
    double const ty = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    double const px = ax.px0 + (ax.px1 - ax.px0) * k / 4.0;
    double const py = ay.px0 + (ay.px1 - ay.px0) * k / 4.0;
    o << "<text x=\"" << num(px) << "\" y=\"" << num(kHeight - kBottom + 16) << "\" text-anchor=\"middle\">"
      << label(ax.log ? std::pow(10.0, tx) : tx) << "</text>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
      << label(ay.log ? std::pow(10.0, ty) : ty) << "</text>\n";
  }
  o << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">"
    << escape(plot.x_label) << (plot.log_x ? " (log)" : "") << "</text>\n";
  o << "<text x=\"14\" y=\"" << num(kHeight / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << num(kHeight / 2) << ")\">" << escape(plot.y_label) << (plot.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    auto const &s = plot.series[si];
    char const *color = kColors[si % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) { continue; }
      if ((plot.log_x && s.x[i] <= 0) || (plot.log_y && s.y[i] <= 0)) { continue; }
      double const px = ax.map(s.x[i]), py = ay.map(s.y[i]);
      if (s.line) {
        pts += (pts.empty() ? "" : " ") + num(px) + "," + num(py);
      } else {
        o << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    if (s.line && !pts.empty()) {
      o << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    }
    o << "<text x=\"" << num(kLeft + 8) << "\" y=\"" << num(kTop + 14 + 14 * double(si)) << "\" fill=\"" << color
      << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_plot(std::filesystem::path const &stem, Plot const &plot, std::string const &csv_comment)
{
  auto svg_path = stem;
  svg_path += ".svg";
  auto csv_path = stem;
  csv_path += ".csv";
  std::ofstream svg(svg_path);
  std::ofstream csv(csv_path);
  if (!svg || !csv) { throw ValidationError("cannot write plot '" + stem.string() + "'"); }
  svg << render_svg(plot);
  if (!csv_comment.empty()) { csv << csv_comment << "\n"; }
  csv << "series,x,y\n";
  for (auto const &s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      csv << s.name << "," << format_real(s.x[i]) << "," << format_real(s.y[i]) << "\n";
    }
  }
}

} // namespace ditscale

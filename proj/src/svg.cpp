#include "mfg/svg.hpp"

#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mfg {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginL = 70;
constexpr int kMarginR = 20;
constexpr int kMarginT = 40;
constexpr int kMarginB = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
                          "#bcbd22", "#e377c2"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Round-ish tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target) {
  std::vector<double> out;
  const double span = hi - lo;
  if (!(span > 0.0)) {
    out.push_back(lo);
    return out;
  }
  double step = std::pow(10.0, std::floor(std::log10(span / target)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * m) <= target) {
      step *= m;
      break;
    }
  }
  const double start = std::ceil(lo / step) * step;
  for (double t = start; t <= hi + 1e-12 * span; t += step)
    out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  return out;
}

}  // namespace

std::string svg_line_chart(const CsvTable& table, const ChartSpec& spec) {
  const auto xs_raw = table.col(spec.x_col);
  std::vector<std::vector<double>> series;
  for (const auto& name : spec.y_cols) series.push_back(table.col(name));
  if (xs_raw.empty()) throw InputError("svg chart: empty table");

  auto transform_y = [&spec](double v) {
    return spec.log_y ? std::log10(std::max(v, 1e-300)) : v;
  };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (double x : xs_raw) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  for (const auto& ys : series)
    for (double y : ys) {
      const double ty = transform_y(y);
      if (std::isfinite(ty)) {
        ymin = std::min(ymin, ty);
        ymax = std::max(ymax, ty);
      }
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) {
    ymax = ymin + 1.0;
    ymin -= 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double plot_w = kWidth - kMarginL - kMarginR;
  const double plot_h = kHeight - kMarginT - kMarginB;
  auto px = [&](double x) {
    return kMarginL + plot_w * (x - xmin) / (xmax - xmin);
  };
  auto py = [&](double ty) {
    return kMarginT + plot_h * (1.0 - (ty - ymin) / (ymax - ymin));
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << spec.title
      << "</text>\n";

  for (double t : ticks(xmin, xmax, 8)) {
    const double X = px(t);
    out << "<line x1=\"" << num(X) << "\" y1=\"" << kMarginT << "\" x2=\""
        << num(X) << "\" y2=\"" << kMarginT + plot_h
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << num(X) << "\" y=\"" << kMarginT + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(ymin, ymax, 6)) {
    const double Y = py(t);
    const double label = spec.log_y ? std::pow(10.0, t) : t;
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << num(Y) << "\" x2=\""
        << kMarginL + plot_w << "\" y2=\"" << num(Y)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << kMarginL - 6 << "\" y=\"" << num(Y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << num(label) << "</text>\n";
  }
  out << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\""
      << num(plot_w) << "\" height=\"" << num(plot_h)
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << kMarginL + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\">" << spec.x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << kMarginT + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\" transform=\"rotate(-90 18 "
      << kMarginT + plot_h / 2 << ")\">" << spec.y_label << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t k = 0; k < xs_raw.size(); ++k) {
      const double ty = transform_y(series[s][k]);
      if (!std::isfinite(ty)) continue;
      out << num(px(xs_raw[k])) << ',' << num(py(ty)) << ' ';
    }
    out << "\"/>\n";
    const double ly = kMarginT + 16 + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << kMarginL + plot_w - 150 << "\" y1=\"" << num(ly)
        << "\" x2=\"" << kMarginL + plot_w - 126 << "\" y2=\"" << num(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kMarginL + plot_w - 120 << "\" y=\"" << num(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << spec.y_cols[s] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void svg_from_csv(const std::string& csv_path, const ChartSpec& spec,
                  const std::string& out_path) {
  const CsvTable table = read_csv(csv_path);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw InputError("cannot write svg file: " + out_path);
  out << svg_line_chart(table, spec);
}

}  // namespace mfg

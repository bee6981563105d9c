// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aqop/types.hpp"

namespace aqop {

namespace {

constexpr int kW = 480;
constexpr int kH = 480;
constexpr int kMargin = 56;

struct Scale {
  double lo, hi;
  double x(double v) const { return kMargin + (v - lo) / (hi - lo) * (kW - 2 * kMargin); }
  double y(double v) const { return kH - kMargin - (v - lo) / (hi - lo) * (kH - 2 * kMargin); }
};

std::ofstream open_svg(const std::string& path, const std::string& title) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write plot: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  return out;
}

}  // namespace

void write_scatter_svg(const std::string& path, const std::vector<double>& observed,
                       const std::vector<double>& estimated, const std::string& title) {
  if (observed.size() != estimated.size() || observed.empty()) {
    throw Error("scatter plot: mismatched or empty series");
  }
  double lo = observed[0], hi = observed[0];
  for (const auto* v : {&observed, &estimated}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const double pad = (hi - lo) * 0.05 + 1e-9;
  Scale s{lo - pad, hi + pad};

  auto out = open_svg(path, title);
  // axes + 1:1 line
  out << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kW - kMargin
      << "' y2='" << kH - kMargin << "' stroke='black'/>\n";
  out << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kMargin << "' y2='"
      << kMargin << "' stroke='black'/>\n";
  out << "<line x1='" << s.x(s.lo) << "' y1='" << s.y(s.lo) << "' x2='" << s.x(s.hi) << "' y2='"
      << s.y(s.hi) << "' stroke='gray' stroke-dasharray='4 3'/>\n";
  out << "<text x='" << kW / 2 << "' y='" << kH - 16 << "' text-anchor='middle' font-size='12'>"
      << "observed</text>\n";
  out << "<text x='16' y='" << kH / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " << kH / 2 << ")'>"
      << "estimated</text>\n";
  for (std::size_t i = 0; i < observed.size(); ++i) {
    out << "<circle cx='" << s.x(observed[i]) << "' cy='" << s.y(estimated[i])
        << "' r='2.5' fill='steelblue' fill-opacity='0.6'/>\n";
  }
  out << "</svg>\n";
}

void write_loss_curve_svg(const std::string& path, const std::vector<double>& train_loss,
                          const std::vector<double>& val_loss, int best_epoch,
                          const std::string& title) {
  if (train_loss.empty() || train_loss.size() != val_loss.size()) {
    throw Error("loss curve plot: mismatched or empty series");
  }
  double lo = train_loss[0], hi = train_loss[0];
  for (const auto* v : {&train_loss, &val_loss}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const double pad = (hi - lo) * 0.05 + 1e-9;
  const double ylo = lo - pad, yhi = hi + pad;
  const auto n = train_loss.size();
  auto px = [&](std::size_t i) {
    return kMargin + static_cast<double>(i) / std::max<std::size_t>(1, n - 1) * (kW - 2 * kMargin);
  };
  auto py = [&](double v) { return kH - kMargin - (v - ylo) / (yhi - ylo) * (kH - 2 * kMargin); };

  auto out = open_svg(path, title);
  auto polyline = [&](const std::vector<double>& series, const char* color) {
    out << "<polyline fill='none' stroke='" << color << "' points='";
    for (std::size_t i = 0; i < series.size(); ++i) out << px(i) << "," << py(series[i]) << " ";
    out << "'/>\n";
  };
  polyline(train_loss, "steelblue");
  polyline(val_loss, "darkorange");
  if (best_epoch >= 1 && static_cast<std::size_t>(best_epoch) <= n) {
    const double x = px(static_cast<std::size_t>(best_epoch - 1));
    out << "<line x1='" << x << "' y1='" << kMargin << "' x2='" << x << "' y2='" << kH - kMargin
        << "' stroke='gray' stroke-dasharray='2 3'/>\n";
  }
  out << "<text x='" << kW - kMargin << "' y='" << kMargin
      << "' text-anchor='end' font-size='11' fill='steelblue'>train</text>\n";
  out << "<text x='" << kW - kMargin << "' y='" << kMargin + 14
      << "' text-anchor='end' font-size='11' fill='darkorange'>validation</text>\n";
  out << "<text x='" << kW / 2 << "' y='" << kH - 16 << "' text-anchor='middle' font-size='12'>"
      << "epoch</text>\n";
  out << "</svg>\n";
}

}  // namespace aqop

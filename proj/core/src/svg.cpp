// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "wideformer/arch.hpp"

namespace wf {

namespace {

constexpr double kW = 720, kH = 480, kLeft = 80, kRight = 200, kTop = 60, kBottom = 60;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                         "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

struct Axis {
  double lo, hi;
  bool log;
  double map(double v, double a, double b) const {
    const double t = log ? (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo)) : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::floor(std::log2(lo)); e <= std::ceil(std::log2(hi)); e += 1) {
        const double v = std::exp2(e);
        if (v >= lo * 0.999 && v <= hi * 1.001) t.push_back(v);
      }
      if (t.size() < 2) t = {lo, hi};
    } else {
      for (int i = 0; i <= 5; ++i) t.push_back(lo + (hi - lo) * i / 5.0);
    }
    return t;
  }
};

Axis make_axis(const std::vector<const Series*>& s, bool x, bool log) {
  double lo = INFINITY, hi = -INFINITY;
  for (const Series* se : s)
    for (double v : x ? se->x : se->y) {
      if (!std::isfinite(v) || (log && v <= 0)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) lo = log ? 1 : 0, hi = log ? 10 : 1;
  if (hi <= lo) {
    if (log) {
      lo /= 2;
      hi *= 2;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  } else if (!log) {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  } else {
    lo /= 1.1;
    hi *= 1.1;
  }
  return {lo, hi, log};
}

}  // namespace

std::string render_svg(const Plot& plot) {
  std::vector<const Series*> all;
  for (const auto& s : plot.series) all.push_back(&s);
  const Axis ax = make_axis(all, true, plot.log_x), ay = make_axis(all, false, plot.log_y);
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(plot.title)
     << "</text>\n";
  for (std::size_t i = 0; i < plot.notes.size(); ++i)
    os << "<text class=\"note\" x=\"" << kW / 2 << "\" y=\"" << 38 + 13 * i << "\" text-anchor=\"middle\">"
       << esc(plot.notes[i]) << "</text>\n";
  os << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t, x0, x1);
    os << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y0 + 5
       << "\" stroke=\"black\"/><text x=\"" << px << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">" << num(t)
       << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t, y0, y1);
    os << "<line x1=\"" << x0 - 5 << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\"" << py
       << "\" stroke=\"black\"/><text x=\"" << x0 - 8 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << num(t)
       << "</text>\n";
  }
  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << esc(plot.x_label)
     << "</text>\n";
  os << "<text transform=\"translate(18," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(plot.y_label) << "</text>\n";
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const Series& s = plot.series[i];
    const char* color = kColors[i % (sizeof kColors / sizeof *kColors)];
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if ((plot.log_x && s.x[k] <= 0) || (plot.log_y && s.y[k] <= 0)) continue;
      os << (k ? " " : "") << ax.map(s.x[k], x0, x1) << "," << ay.map(s.y[k], y0, y1);
    }
    os << "\"><title>" << esc(s.name) << "</title></polyline>\n";
    const double ly = y1 + 14 + 15 * double(i);
    os << "<line x1=\"" << x1 + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << x1 + 30 << "\" y2=\"" << ly - 4
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << x1 + 35 << "\" y=\"" << ly << "\">"
       << esc(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) return NAN;
  const double den = k * sxx - sx * sx;
  return den == 0 ? NAN : (k * sxy - sx * sy) / den;
}

namespace {
void require(const CsvTable& t, std::initializer_list<const char*> cols, const char* what) {
  for (const char* c : cols)
    if (t.column(c) < 0) throw InputError(std::string(what) + ": missing column '" + c + "'");
}
}  // namespace

Plot kernel_depth_plot(const CsvTable& t) {
  require(t, {"block", "pair1", "pair2", "G"}, "kernel csv");
  Plot p;
  p.title = "kernel diagonal vs depth";
  p.x_label = "block";
  p.y_label = "G(p, p)";
  std::map<int, Series> by_pair;
  const int bc = t.column("block"), p1 = t.column("pair1");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.number(r, "pair1") != t.number(r, "pair2")) continue;
    const int pair = std::stoi(t.rows[r][std::size_t(p1)]);
    Series& s = by_pair[pair];
    s.name = "pair " + std::to_string(pair);
    s.x.push_back(std::stod(t.rows[r][std::size_t(bc)]));
    s.y.push_back(t.number(r, "G"));
  }
  if (by_pair.empty()) throw InputError("kernel csv: no diagonal rows");
  for (auto& [k, s] : by_pair) p.series.push_back(std::move(s));
  return p;
}

Plot grad_width_plot(const CsvTable& t) {
  require(t, {"model", "group", "width", "mean_abs_grad"}, "grads csv");
  Plot p;
  p.title = "mean |g| vs width";
  p.x_label = "width n";
  p.y_label = "mean |dL/dtheta|";
  p.log_x = p.log_y = true;
  std::map<std::string, Series> by;
  const int mc = t.column("model"), gc = t.column("group");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string key = t.rows[r][std::size_t(mc)] + ":" + t.rows[r][std::size_t(gc)];
    Series& s = by[key];
    s.name = key;
    s.x.push_back(t.number(r, "width"));
    s.y.push_back(t.number(r, "mean_abs_grad"));
  }
  for (auto& [k, s] : by) {
    const double slope = loglog_slope(s.x, s.y);
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << slope;
    s.name += " (slope " + os.str() + ")";
    p.series.push_back(std::move(s));
  }
  return p;
}

Plot probe_width_plot(const CsvTable& t) {
  require(t, {"plan", "optimizer", "width", "mean_abs_df_over_lr"}, "probe csv");
  Plot p;
  p.title = "one-step |df|/lr vs width";
  p.x_label = "width n";
  p.y_label = "mean |df| / lr";
  p.log_x = p.log_y = true;
  std::map<std::string, Series> by;
  const int pc = t.column("plan"), oc = t.column("optimizer");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string key = t.rows[r][std::size_t(pc)] + ":" + t.rows[r][std::size_t(oc)];
    Series& s = by[key];
    s.name = key;
    s.x.push_back(t.number(r, "width"));
    s.y.push_back(t.number(r, "mean_abs_df_over_lr"));
  }
  for (auto& [k, s] : by) p.series.push_back(std::move(s));
  return p;
}

}  // namespace wf

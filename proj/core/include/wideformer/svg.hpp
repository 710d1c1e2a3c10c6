// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Minimal standalone SVG line plots.

#ifndef WIDEFORMER_SVG_HPP_
#define WIDEFORMER_SVG_HPP_

#include <string>
#include <vector>

#include "wideformer/io.hpp"

namespace wf {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct Plot {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
  std::vector<std::string> notes;  // printed under the title
};

std::string render_svg(const Plot& plot);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Plots built from the CSV files written by the CLI.  Each throws
// InputError when required columns are missing.
Plot kernel_depth_plot(const CsvTable& kernels);  // diagonal G per pair vs block
Plot grad_width_plot(const CsvTable& grads);      // |g| vs width, log-log, fitted slopes
Plot probe_width_plot(const CsvTable& probes);    // |df|/lr vs width

}  // namespace wf

#endif  // WIDEFORMER_SVG_HPP_

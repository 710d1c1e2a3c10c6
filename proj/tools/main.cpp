// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// wideformer: plan / propagate / verify / report.
// Exit codes: 0 success, 1 check or numeric failure, 2 input error.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wideformer/config.hpp"
#include "wideformer/io.hpp"
#include "wideformer/ntk.hpp"
#include "wideformer/svg.hpp"
#include "wideformer/verify.hpp"

namespace fs = std::filesystem;
using namespace wf;

namespace {

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

int cmd_plan(const RunConfig& cfg, const std::string& out) {
  const ScalingPlan plan = build_plan(cfg);
  write_atomic(join(out, "plan.json"), plan_to_json(plan));
  const std::string table = render_plan_table(plan, Optimizer::Sgd) + "\n" + render_plan_table(plan, Optimizer::AdamW);
  write_atomic(join(out, "plan.txt"), table);
  std::cout << render_plan_table(plan, cfg.optimizer);
  return 0;
}

int cmd_propagate(const RunConfig& cfg, const std::string& out) {
  const ScalingPlan plan = build_plan(cfg);
  const Inputs inputs = build_inputs(cfg, cfg.arch);
  const KernelTrace kt = propagate_kernels(cfg.arch, plan, inputs, cfg.propagate);
  const NtkTrace nt = propagate_ntk(kt, cfg.arch, plan, cfg.propagate.quadrature_order);
  write_atomic(join(out, "kernels.csv"), kernel_trace_csv(kt));
  write_atomic(join(out, "ntk.csv"), ntk_trace_csv(nt));
  std::cout << "wrote " << join(out, "kernels.csv") << " and " << join(out, "ntk.csv") << " ("
            << kt.entries.size() - 1 << " kernel stages)\n";
  return 0;
}

int cmd_verify(RunConfig cfg, const std::string& out, const std::vector<int>& widths, const std::vector<int>& only) {
  if (!widths.empty()) {
    cfg.verify.widths = widths;
    cfg.validate();
  }
  const VerifyReport rep = run_verify(cfg, only, [](const CriterionResult& c) {
    std::cout << summary_line(c) << std::endl;
    for (const auto& k : c.checks)
      if (k.verdict != Verdict::Pass)
        std::cout << "    " << to_string(k.verdict) << " " << k.name << ": value " << k.value << ", tolerance "
                  << k.tolerance << (k.detail.empty() ? "" : " (" + k.detail + ")") << "\n";
  });
  write_atomic(join(out, "report.json"), report_json(rep, cfg));
  write_atomic(join(out, "verify.csv"), verify_csv(rep));
  if (!rep.artifacts.grads.empty()) write_atomic(join(out, "grads.csv"), grads_csv(rep.artifacts));
  if (!rep.artifacts.probes.empty()) write_atomic(join(out, "probe.csv"), probe_csv(rep.artifacts));
  for (const auto& [w, est] : rep.artifacts.kernels)
    write_atomic(join(out, "kernel_mc_n" + std::to_string(w) + ".csv"), mc_kernel_csv(est));
  return rep.all_pass() ? 0 : 1;
}

int cmd_report(const std::string& in, const std::string& out) {
  int written = 0;
  auto plot = [&](const std::string& csv, const std::string& svg, Plot (*make)(const CsvTable&)) {
    const std::string path = join(in, csv);
    if (!fs::exists(path)) return;
    write_atomic(join(out, svg), render_svg(make(read_csv(path))));
    std::cout << "wrote " << join(out, svg) << "\n";
    ++written;
  };
  plot("kernels.csv", "kernel_depth.svg", kernel_depth_plot);
  plot("grads.csv", "grad_width.svg", grad_width_plot);
  plot("probe.csv", "probe_width.svg", probe_width_plot);
  if (!written) throw InputError("no kernels.csv, grads.csv or probe.csv in '" + in + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wide-Transformer effective theory: scaling plans, kernel/NTK recursions, finite-width checks"};
  app.require_subcommand(1);
  std::string config, out = "", in;
  std::vector<int> widths, only;

  auto* plan = app.add_subcommand("plan", "write plan.json and the plan table");
  auto* prop = app.add_subcommand("propagate", "write kernels.csv and ntk.csv");
  auto* ver = app.add_subcommand("verify", "run the theory-vs-simulation checks");
  auto* rep = app.add_subcommand("report", "render SVG plots from CSV outputs");
  for (auto* c : {plan, prop, ver}) {
    c->add_option("--config", config, "TOML config")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out, "output directory (default: [output] dir)");
  }
  ver->add_option("--widths", widths, "comma-separated widths, overrides [verify] widths")->delimiter(',');
  ver->add_option("--only", only, "comma-separated criterion ids")->delimiter(',');
  rep->add_option("--in", in, "directory with CSV outputs")->required();
  rep->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*rep) return cmd_report(in, out);
    const RunConfig cfg = load_config(config);
    const std::string dir = out.empty() ? cfg.out_dir : out;
    if (*plan) return cmd_plan(cfg, dir);
    if (*prop) return cmd_propagate(cfg, dir);
    return cmd_verify(cfg, dir, widths, only);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

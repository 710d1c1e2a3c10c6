// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Runs every acceptance criterion on a config (default: the desk config)
// and prints one line per criterion.  Exit 0 iff all pass.

#include <iostream>

#include "wideformer/config.hpp"
#include "wideformer/io.hpp"
#include "wideformer/verify.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: wideformer_acceptance <config.toml> [out-dir]\n";
    return 2;
  }
  try {
    const wf::RunConfig cfg = wf::load_config(argv[1]);
    const wf::VerifyReport rep = wf::run_verify(cfg, {}, [](const wf::CriterionResult& c) {
      std::cout << wf::summary_line(c) << std::endl;
      for (const auto& k : c.checks)
        if (k.verdict != wf::Verdict::Pass)
          std::cout << "    " << wf::to_string(k.verdict) << " " << k.name << ": value " << k.value
                    << ", tolerance " << k.tolerance << (k.detail.empty() ? "" : " (" + k.detail + ")")
                    << std::endl;
    });
    if (argc > 2) {
      const std::string out = argv[2];
      wf::write_atomic(out + "/report.json", wf::report_json(rep, cfg));
      wf::write_atomic(out + "/verify.csv", wf::verify_csv(rep));
    }
    int passed = 0;
    for (const auto& c : rep.criteria) passed += c.verdict() == wf::Verdict::Pass;
    std::cout << passed << "/" << rep.criteria.size() << " criteria passed" << std::endl;
    return rep.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

#include <CLI11.hpp>
#include <iostream>

#include "oasis/io/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Principal eigenvalues, logistic steady states and blow-up candidates on planar domains"};
  app.require_subcommand(1, 1);
  std::string config, out;
  bool trace = false, heatmaps = false;
  int workers = 0;
  for (const char* name : {"eigen", "solve", "sweep", "blowup", "annulus", "selftest"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "configuration file");
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--trace", trace, "write trace.csv");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--heatmaps", heatmaps, "write 16-bit graymaps");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  oasis::io::RunConfig cfg;
  try {
    if (!config.empty()) cfg = oasis::io::parse_config(config);
    else if (cmd != "selftest") throw oasis::Error("cli", "VALIDATION_ERROR", "config: --config is required");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return oasis::io::kFailure;
  }
  if (!out.empty()) cfg.out = out;
  if (workers > 0) cfg.workers = workers;
  cfg.trace = cfg.trace || trace;
  cfg.heatmaps = cfg.heatmaps || heatmaps;
  const int code = oasis::io::run(cmd, cfg);
  if (code != oasis::io::kFailure) std::cout << cmd << ": wrote " << cfg.out << "/results.csv\n";
  return code;
}

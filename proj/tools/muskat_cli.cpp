// Command-line front end: run-jko, run-pde, compare, refine, diagnose.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "muskat/scenario.hpp"

namespace {

int report(const muskat::RunOutcome& out) {
  if (out.exit_code == 2) {
    std::fprintf(stderr, "error: %s\n", out.error.c_str());
  } else {
    for (const std::string& name : out.failed) std::fprintf(stderr, "verdict failed: %s\n", name.c_str());
    std::printf("%s: %s\n", out.exit_code == 0 ? "ok" : "fail", out.directory.string().c_str());
  }
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"JKO and finite-difference solvers for the thin-film Muskat system"};
  app.require_subcommand(1);
  app.footer("Relative output directories resolve under $MUSKAT_OUTPUT_ROOT when it is set.");

  std::string config;
  std::string run_dir;
  muskat::RunOptions refine_opts;
  double t_probe = 0.0;

  CLI::App* jko = app.add_subcommand("run-jko", "JKO trajectory, diagnostics and verdicts");
  jko->add_option("config", config, "scenario JSON")->required();
  CLI::App* pde = app.add_subcommand("run-pde", "finite-difference reference run");
  pde->add_option("config", config, "scenario JSON")->required();
  CLI::App* cmp = app.add_subcommand("compare", "JKO interpolant against the reference at the output times");
  cmp->add_option("config", config, "scenario JSON")->required();
  CLI::App* ref = app.add_subcommand("refine", "Cauchy distances between successive step sizes");
  ref->add_option("config", config, "scenario JSON")->required();
  ref->add_option("--tau-list", refine_opts.tau_list, "strictly decreasing step sizes")->required()->expected(2, -1);
  CLI::Option* probe = ref->add_option("--t-probe", t_probe, "probe time (default: steps * tau)");
  CLI::App* diag = app.add_subcommand("diagnose", "re-run diagnostics on a run-jko output directory");
  diag->add_option("run-dir", run_dir, "directory written by run-jko")->required();

  CLI11_PARSE(app, argc, argv);

  if (*jko) return report(muskat::run_config_file(config, muskat::RunMode::jko));
  if (*pde) return report(muskat::run_config_file(config, muskat::RunMode::pde));
  if (*cmp) return report(muskat::run_config_file(config, muskat::RunMode::compare));
  if (*ref) {
    if (*probe) refine_opts.t_probe = t_probe;
    return report(muskat::run_config_file(config, muskat::RunMode::refine, refine_opts));
  }
  return report(muskat::diagnose_run(run_dir));
}

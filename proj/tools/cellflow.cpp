#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cellflow/config.hpp"
#include "cellflow/errors.hpp"
#include "cellflow/pipeline.hpp"
#include "cellflow/symmetry.hpp"
#include "cellflow/verify.hpp"

using namespace cellflow;

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
};

RunConfig resolve(const Args& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (a.seed) cfg.optimizer.seed = *a.seed;
  if (!a.out.empty()) cfg.output = a.out;
  cfg.validate();
  return cfg;
}

int cmd_groups() {
  std::printf("%-6s %-10s %s\n", "group", "lattice", "|G|");
  for (auto name : group_names()) {
    const auto g = lookup_group(name);
    std::printf("%-6s %-10s %zu\n", g.name().c_str(), std::string(to_string(g.lattice_kind())).c_str(),
                g.order());
  }
  return 0;
}

int cmd_verify(const RunConfig& cfg) {
  const VerifyReport r = run_verify(cfg);
  for (const auto& c : r.checks) {
    std::printf("%-4s %-12s error %.3e tol %.3e%s%s\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.value,
                c.tolerance, c.detail.empty() ? "" : "  ", c.detail.c_str());
  }
  if (const PropertyCheck* f = r.first_failure()) {
    std::printf("verification failed: %s\n", f->name.c_str());
    return 1;
  }
  std::printf("all checks passed\n");
  return 0;
}

int cmd_design(const RunConfig& cfg) {
  const DesignSummary s = run_design(cfg, cfg.output, &std::cout);
  std::printf("reference loss %.6g nu_ef %.6g\n", s.reference_loss, s.reference_nu_ef);
  std::printf("best loss %.6g nu_ef %.6g (restart %d, %d steps, %d rejected)\n", s.best_loss, s.best_nu_ef,
              s.best_restart, s.steps, s.rejected);
  std::printf("outputs in %s\n", cfg.output.c_str());
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& checkpoint) {
  const SimulateSummary s = run_simulate(cfg, checkpoint, cfg.output);
  std::printf("nu_ef %.6g, S(%.4g) = %.6g\n", s.nu_ef, s.curve.back().strain, s.curve.back().stress);
  std::printf("outputs in %s\n", cfg.output.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry-preserving flows for cellular solid design"};
  app.require_subcommand(1);
  Args args;
  auto add_common = [&](CLI::App* sub, bool checkpoint) {
    sub->add_option("--config", args.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (overrides the config)");
    sub->add_option("--seed", args.seed, "master seed (overrides the config)");
    if (checkpoint) sub->add_option("--checkpoint", args.checkpoint, "flow checkpoint JSON")->check(CLI::ExistingFile);
  };
  auto* groups = app.add_subcommand("groups", "list the 17 wallpaper groups");
  auto* verify = app.add_subcommand("verify", "run the invariant checks for a config");
  auto* design = app.add_subcommand("design", "optimise a design");
  auto* simulate = app.add_subcommand("simulate", "simulate a checkpointed design");
  auto* render = app.add_subcommand("render", "render shapes and the velocity field");
  add_common(verify, false);
  add_common(design, false);
  add_common(simulate, true);
  add_common(render, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (groups->parsed()) return cmd_groups();
    const RunConfig cfg = resolve(args);
    if (verify->parsed()) return cmd_verify(cfg);
    if (design->parsed()) return cmd_design(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg, args.checkpoint);
    if (render->parsed()) {
      run_render(cfg, args.checkpoint, cfg.output);
      std::printf("outputs in %s\n", cfg.output.c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

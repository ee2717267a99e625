#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cellflow/config.hpp"
#include "cellflow/errors.hpp"
#include "cellflow/io.hpp"
#include "cellflow/pipeline.hpp"
#include "cellflow/verify.hpp"

using namespace cellflow;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  return parse_config(R"({
    "schema_version": 1, "group": "p4",
    "domain": {"cells_x": 1, "cells_y": 1},
    "pores": {"segments": 16},
    "mesh": {"target_h": 0.25},
    "flow": {"n_steps": 8},
    "load": {"mode": "tension", "final_strain": 0.05, "n_increments": 2},
    "loss": {"kind": "poisson_target", "nu_target": -0.5},
    "optimizer": {"budget": 3, "restarts": 1, "seed": 3, "lr": 0.01, "checkpoint_every": 1}
  })");
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / "cellflow_unit" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("verify passes on the small config") {
  RunConfig cfg = small_config();
  cfg.verify.gradient_directions = 2;
  const VerifyReport r = run_verify(cfg);
  CHECK(r.passed());
  CHECK(r.first_failure() == nullptr);
  CHECK(r.checks.size() >= 4);
}

TEST_CASE("verify reports a coarse integrator as a volume failure") {
  RunConfig cfg = small_config();
  cfg.flow.n_steps = 1;
  cfg.verify.theta_scale = 0.5;
  cfg.verify.volume_tol = 1e-12;
  const VerifyReport r = run_verify(cfg);
  CHECK_FALSE(r.passed());
  REQUIRE(r.first_failure() != nullptr);
  CHECK(r.first_failure()->name == "volume");
}

TEST_CASE("force targets must sit on load increments") {
  RunConfig cfg = small_config();
  cfg.load.final_strain = 0.1;
  cfg.loss.kind = LossKind::force_curve;
  cfg.loss.target.type = "linear";
  cfg.loss.target.samples = 3;
  cfg.loss.target.s0 = 1.0;
  CHECK_THROWS_AS(make_setup(cfg), ConfigError);
  cfg.loss.target.samples = 2;
  const Setup s = make_setup(cfg);
  CHECK(s.loss.target.size() == 2);
  REQUIRE(s.s0.has_value());
  CHECK(*s.s0 == 1.0);
}

TEST_CASE("reference stress defines s0 when unset") {
  RunConfig cfg = small_config();
  cfg.load.final_strain = 0.1;
  cfg.loss.kind = LossKind::force_curve;
  cfg.loss.target.samples = 2;
  const Setup s = make_setup(cfg);
  REQUIRE(s.s0.has_value());
  CHECK(*s.s0 > 0.0);
  CHECK(*s.s0 == doctest::Approx(reference_stress(s.problem)));
}

TEST_CASE("design, simulate and render write their outputs") {
  const RunConfig cfg = small_config();
  const fs::path dir = scratch("design");
  const DesignSummary s = run_design(cfg, dir.string());
  CHECK(s.steps >= 1);
  CHECK(s.best_loss <= s.reference_loss);
  for (const char* f : {"resolved_config.json", "history.csv", "history.json", "summary.json", "checkpoint.json",
                        "curve.csv", "reference.svg", "deformed.svg", "deformed_mesh.txt"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  CHECK(parse_config(slurp(dir / "resolved_config.json")).group == "p4");
  const Checkpoint cp = read_checkpoint((dir / "checkpoint.json").string());
  CHECK(cp.best_loss == s.best_loss);

  const fs::path sim = scratch("simulate");
  const SimulateSummary r = run_simulate(cfg, (dir / "checkpoint.json").string(), sim.string());
  CHECK(r.curve.size() == 3);
  CHECK(r.nu_ef == doctest::Approx(s.best_nu_ef).epsilon(1e-9));
  CHECK(fs::exists(sim / "loaded.svg"));

  const fs::path ren = scratch("render");
  run_render(cfg, (dir / "checkpoint.json").string(), ren.string());
  CHECK(fs::exists(ren / "velocity.svg"));
}

TEST_CASE("mismatched checkpoints are refused") {
  RunConfig cfg = small_config();
  const fs::path dir = scratch("mismatch");
  ensure_directory(dir.string());
  MlpArchitecture arch;
  arch.hidden = {3};
  write_checkpoint((dir / "cp.json").string(), make_checkpoint(Mlp(arch), 0, 0, 0.0));
  CHECK_THROWS_AS(run_simulate(cfg, (dir / "cp.json").string(), (dir / "out").string()),
                  CheckpointMismatchError);
}

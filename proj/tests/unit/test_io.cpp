#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cellflow/config.hpp"
#include "cellflow/errors.hpp"
#include "cellflow/io.hpp"

using namespace cellflow;

TEST_CASE("config defaults survive a round trip") {
  const RunConfig a = parse_config(R"({"schema_version": 1})");
  const RunConfig b = parse_config(emit_config(a));
  CHECK(emit_config(a) == emit_config(b));
  CHECK(b.group == "p4");
  CHECK(b.cells_x == 3);
  CHECK(b.optimizer.budget == 300);
}

TEST_CASE("config overrides are read") {
  const RunConfig c = parse_config(R"({
    "schema_version": 1, "group": "p2gg",
    "domain": {"cells_x": 2, "cells_y": 4},
    "material": {"E": 2.0, "nu": 0.3},
    "load": {"mode": "compression", "final_strain": 0.05, "n_increments": 5},
    "loss": {"kind": "force_curve", "target": {"type": "linear", "beta": 0.5, "s0": 1.5, "samples": 5}},
    "optimizer": {"seed": 42}
  })");
  CHECK(c.group == "p2gg");
  CHECK(c.cells_y == 4);
  CHECK(c.material.E == 2.0);
  CHECK(c.load.mode == LoadMode::compression);
  CHECK(c.loss.kind == LossKind::force_curve);
  REQUIRE(c.loss.target.s0.has_value());
  CHECK(*c.loss.target.s0 == 1.5);
  CHECK(c.optimizer.seed == 42u);
  CHECK(emit_config(parse_config(emit_config(c))) == emit_config(c));
}

TEST_CASE("malformed configs are rejected") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"group": "p4"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 99})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "grup": "p4"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "group": "p5"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "material": {"nu": 0.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "domain": {"cells_x": "3"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "optimizer": {"budget": 0}})"), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  MlpArchitecture arch;
  arch.hidden = {4, 3};
  const Mlp net = Mlp::random(arch, 7, 0.3);
  const Checkpoint cp = make_checkpoint(net, 7, 12, 0.25, R"({"group":"p4"})");
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(cp));
  CHECK(back.arch == arch);
  CHECK(back.seed == 7u);
  CHECK(back.step == 12);
  CHECK(back.best_loss == 0.25);
  const Mlp restored = checkpoint_network(back, arch);
  REQUIRE(restored.num_params() == net.num_params());
  for (std::size_t i = 0; i < net.num_params(); ++i) CHECK(restored.params()[i] == net.params()[i]);

  MlpArchitecture other = arch;
  other.hidden = {10, 10};
  CHECK_THROWS_AS(checkpoint_network(back, other), CheckpointMismatchError);
  CHECK_THROWS_AS(checkpoint_from_json("{\"params\": []}"), CheckpointMismatchError);
}

TEST_CASE("mesh text round trip") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(2, 1), MeshOptions{0.5, 25.0});
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(2 * m.nodes.size()), -1.0, 1.0 / 3.0);
  std::stringstream ss;
  write_mesh(ss, m, &u);
  const MeshFile f = read_mesh(ss);
  REQUIRE(f.mesh.nodes.size() == m.nodes.size());
  REQUIRE(f.mesh.triangles.size() == m.triangles.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) CHECK(f.mesh.nodes[i] == m.nodes[i]);
  CHECK(f.mesh.triangles == m.triangles);
  CHECK(f.u == u);
  CHECK(f.mesh.boundary.size() == m.boundary.size());
  CHECK(f.mesh.left_strip == m.left_strip);
  CHECK(std::abs(f.mesh.area() - 2.0) < 1e-12);
}

TEST_CASE("csv formats") {
  std::ostringstream c;
  write_curve_csv(c, {{0.0, 0.0}, {0.02, 0.125}});
  const std::string cs = c.str();
  CHECK(cs.rfind("epsilon,S\n", 0) == 0);
  CHECK(std::count(cs.begin(), cs.end(), '\n') == 3);

  std::ostringstream h;
  write_history_csv(h, {{0, 0, 1.5, 0.3}, {1, 0, 1.25, 0.2}});
  const std::string hs = h.str();
  CHECK(hs.rfind("step,loss,nu_ef\n", 0) == 0);
  CHECK(std::count(hs.begin(), hs.end(), '\n') == 3);
}

TEST_CASE("svg output") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(1, 1), MeshOptions{0.5, 25.0});
  CHECK(boundary_loops(m).size() == 1);
  const std::string svg = render_mesh_svg(m, default_view(m));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("evenodd") != std::string::npos);
}

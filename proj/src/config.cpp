#include "cellflow/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "cellflow/errors.hpp"
#include "json.hpp"

namespace cellflow {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    }
    out = v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

Vec2 read_vec2(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(where + ": expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

json vec2(const Vec2& v) { return json::array({v.x(), v.y()}); }

}  // namespace

void RunConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("schema_version " + std::to_string(schema_version) + " is not supported");
  }
  try {
    lookup_group(group);
  } catch (const UnknownGroupError& e) {
    throw ConfigError(e.what());
  }
  if (cells_x < 1 || cells_y < 1) throw ConfigError("domain: cells must be at least 1");
  if (!(cell_scale > 0.0)) throw ConfigError("domain: cell_scale must be positive");
  if (pore_segments < 3) throw ConfigError("pores: segments must be at least 3");
  if (!(solid_fraction > 0.0 && solid_fraction < 1.0)) {
    throw ConfigError("pores: solid_fraction must lie in (0, 1)");
  }
  if (!(mesh.target_h > 0.0)) throw ConfigError("mesh: target_h must be positive");
  if (!(mesh.min_angle_deg > 0.0 && mesh.min_angle_deg <= 33.0)) {
    throw ConfigError("mesh: min_angle_deg must lie in (0, 33]");
  }
  material.validate();
  flow.validate();
  if (arch.input_dim != 5 || arch.output_dim != 1 || arch.hidden.empty()) {
    throw ConfigError("flow: network maps 5 inputs to 1 output with at least one hidden layer");
  }
  for (int w : arch.hidden) {
    if (w < 1) throw ConfigError("flow: hidden widths must be positive");
  }
  load.validate();
  if (!(load.final_strain > 0.0)) throw ConfigError("load: final_strain must be positive");
  if (!(newton.rel_tol > 0.0) || newton.max_iterations < 1) throw ConfigError("newton: bad options");
  if (loss.kind == LossKind::force_curve) {
    const auto& t = loss.target;
    if (t.type != "linear" && t.type != "plateau" && t.type != "samples") {
      throw ConfigError("loss.target.type must be linear, plateau or samples");
    }
    if (t.type != "samples" && t.samples < 1) throw ConfigError("loss.target.samples must be positive");
    if (t.type == "samples" && t.points.empty()) throw ConfigError("loss.target.points is empty");
  }
  if (optimizer.budget < 1) throw ConfigError("optimizer: budget must be at least 1");
  if (optimizer.restarts < 1) throw ConfigError("optimizer: restarts must be at least 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer: lr must be positive");
  if (optimizer.max_retries < 0) throw ConfigError("optimizer: max_retries must be non-negative");
  if (!(optimizer.init_scale >= 0.0)) throw ConfigError("optimizer: init_scale must be non-negative");
  if (optimizer.checkpoint_every < 1) throw ConfigError("optimizer: checkpoint_every must be positive");
  if (verify.equivariance_points < 1 || verify.divergence_points < 1 || verify.gradient_directions < 0) {
    throw ConfigError("verify: point counts must be positive");
  }
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"schema_version", "group", "domain", "pores", "mesh", "material", "flow",
                           "load", "newton", "loss", "optimizer", "verify", "output"});
  if (!j.contains("schema_version")) throw ConfigError("config: schema_version is required");
  RunConfig c;
  read(j, "schema_version", c.schema_version, "config");
  read(j, "group", c.group, "config");
  read(j, "output", c.output, "config");

  if (j.contains("domain")) {
    const json& d = j["domain"];
    check_keys(d, "domain", {"cells_x", "cells_y", "cell_scale", "origin"});
    read(d, "cells_x", c.cells_x, "domain");
    read(d, "cells_y", c.cells_y, "domain");
    read(d, "cell_scale", c.cell_scale, "domain");
    if (d.contains("origin") && !d["origin"].is_null()) c.origin = read_vec2(d["origin"], "domain.origin");
  }
  if (j.contains("pores")) {
    const json& p = j["pores"];
    check_keys(p, "pores", {"centers", "segments", "solid_fraction"});
    if (p.contains("centers")) {
      if (!p["centers"].is_array()) throw ConfigError("pores.centers: expected an array");
      for (const auto& v : p["centers"]) c.pore_centers.push_back(read_vec2(v, "pores.centers"));
    }
    read(p, "segments", c.pore_segments, "pores");
    read(p, "solid_fraction", c.solid_fraction, "pores");
  }
  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    check_keys(m, "mesh", {"target_h", "min_angle_deg"});
    read(m, "target_h", c.mesh.target_h, "mesh");
    read(m, "min_angle_deg", c.mesh.min_angle_deg, "mesh");
  }
  if (j.contains("material")) {
    const json& m = j["material"];
    check_keys(m, "material", {"E", "nu"});
    read(m, "E", c.material.E, "material");
    read(m, "nu", c.material.nu, "material");
  }
  if (j.contains("flow")) {
    const json& f = j["flow"];
    check_keys(f, "flow", {"t_max", "n_steps", "envelope_margin", "hidden", "min_angle_floor"});
    read(f, "t_max", c.flow.t_max, "flow");
    read(f, "n_steps", c.flow.n_steps, "flow");
    read(f, "envelope_margin", c.flow.envelope_margin, "flow");
    read(f, "min_angle_floor", c.min_angle_floor, "flow");
    if (f.contains("hidden")) {
      if (!f["hidden"].is_array()) throw ConfigError("flow.hidden: expected an array");
      c.arch.hidden.clear();
      for (const auto& v : f["hidden"]) {
        if (!v.is_number_integer()) throw ConfigError("flow.hidden: expected integers");
        c.arch.hidden.push_back(v.get<int>());
      }
    }
  }
  if (j.contains("load")) {
    const json& l = j["load"];
    check_keys(l, "load", {"mode", "final_strain", "n_increments"});
    std::string mode = c.load.mode == LoadMode::tension ? "tension" : "compression";
    read(l, "mode", mode, "load");
    if (mode != "tension" && mode != "compression") throw ConfigError("load.mode must be tension or compression");
    c.load.mode = mode == "tension" ? LoadMode::tension : LoadMode::compression;
    read(l, "final_strain", c.load.final_strain, "load");
    read(l, "n_increments", c.load.n_increments, "load");
  }
  if (j.contains("newton")) {
    const json& n = j["newton"];
    check_keys(n, "newton", {"rel_tol", "max_iterations", "max_backtracks"});
    read(n, "rel_tol", c.newton.rel_tol, "newton");
    read(n, "max_iterations", c.newton.max_iterations, "newton");
    read(n, "max_backtracks", c.newton.max_backtracks, "newton");
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    check_keys(l, "loss", {"kind", "nu_target", "sign_weight", "weight_left", "weight_right", "target"});
    std::string kind(to_string(c.loss.kind));
    read(l, "kind", kind, "loss");
    c.loss.kind = loss_kind_from_string(kind);
    read(l, "nu_target", c.loss.nu_target, "loss");
    if (l.contains("sign_weight") && !l["sign_weight"].is_null()) {
      double w = 0.0;
      read(l, "sign_weight", w, "loss");
      c.loss.sign_weight = w;
    }
    read(l, "weight_left", c.loss.weight_left, "loss");
    read(l, "weight_right", c.loss.weight_right, "loss");
    if (l.contains("target")) {
      const json& t = l["target"];
      check_keys(t, "loss.target", {"type", "beta", "s0", "slope", "eps_cr", "samples", "points"});
      read(t, "type", c.loss.target.type, "loss.target");
      read(t, "beta", c.loss.target.beta, "loss.target");
      if (t.contains("s0") && !t["s0"].is_null()) {
        double s0 = 0.0;
        read(t, "s0", s0, "loss.target");
        c.loss.target.s0 = s0;
      }
      read(t, "slope", c.loss.target.slope, "loss.target");
      read(t, "eps_cr", c.loss.target.eps_cr, "loss.target");
      read(t, "samples", c.loss.target.samples, "loss.target");
      if (t.contains("points")) {
        if (!t["points"].is_array()) throw ConfigError("loss.target.points: expected an array");
        for (const auto& v : t["points"]) {
          const Vec2 p = read_vec2(v, "loss.target.points");
          c.loss.target.points.push_back({p.x(), p.y()});
        }
      }
    }
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    check_keys(o, "optimizer", {"budget", "lr", "restarts", "seed", "init_scale", "max_retries",
                                "threshold", "checkpoint_every"});
    read(o, "budget", c.optimizer.budget, "optimizer");
    read(o, "lr", c.optimizer.lr, "optimizer");
    read(o, "restarts", c.optimizer.restarts, "optimizer");
    read(o, "seed", c.optimizer.seed, "optimizer");
    read(o, "init_scale", c.optimizer.init_scale, "optimizer");
    read(o, "max_retries", c.optimizer.max_retries, "optimizer");
    read(o, "threshold", c.optimizer.threshold, "optimizer");
    read(o, "checkpoint_every", c.optimizer.checkpoint_every, "optimizer");
  }
  if (j.contains("verify")) {
    const json& v = j["verify"];
    check_keys(v, "verify", {"theta_scale", "equivariance_points", "equivariance_tol", "divergence_points",
                             "divergence_tol", "volume_tol", "mesh_volume_tol", "gradient_directions",
                             "gradient_tol"});
    read(v, "theta_scale", c.verify.theta_scale, "verify");
    read(v, "equivariance_points", c.verify.equivariance_points, "verify");
    read(v, "equivariance_tol", c.verify.equivariance_tol, "verify");
    read(v, "divergence_points", c.verify.divergence_points, "verify");
    read(v, "divergence_tol", c.verify.divergence_tol, "verify");
    read(v, "volume_tol", c.verify.volume_tol, "verify");
    read(v, "mesh_volume_tol", c.verify.mesh_volume_tol, "verify");
    read(v, "gradient_directions", c.verify.gradient_directions, "verify");
    read(v, "gradient_tol", c.verify.gradient_tol, "verify");
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["group"] = c.group;
  j["domain"] = {{"cells_x", c.cells_x},
                 {"cells_y", c.cells_y},
                 {"cell_scale", c.cell_scale},
                 {"origin", c.origin ? vec2(*c.origin) : json(nullptr)}};
  json centers = json::array();
  for (const auto& p : c.pore_centers) centers.push_back(vec2(p));
  j["pores"] = {{"centers", centers}, {"segments", c.pore_segments}, {"solid_fraction", c.solid_fraction}};
  j["mesh"] = {{"target_h", c.mesh.target_h}, {"min_angle_deg", c.mesh.min_angle_deg}};
  j["material"] = {{"E", c.material.E}, {"nu", c.material.nu}};
  j["flow"] = {{"t_max", c.flow.t_max},
               {"n_steps", c.flow.n_steps},
               {"envelope_margin", c.flow.envelope_margin},
               {"hidden", c.arch.hidden},
               {"min_angle_floor", c.min_angle_floor}};
  j["load"] = {{"mode", c.load.mode == LoadMode::tension ? "tension" : "compression"},
               {"final_strain", c.load.final_strain},
               {"n_increments", c.load.n_increments}};
  j["newton"] = {{"rel_tol", c.newton.rel_tol},
                 {"max_iterations", c.newton.max_iterations},
                 {"max_backtracks", c.newton.max_backtracks}};
  json points = json::array();
  for (const auto& p : c.loss.target.points) points.push_back(json::array({p.strain, p.stress}));
  const auto& t = c.loss.target;
  j["loss"] = {{"kind", std::string(to_string(c.loss.kind))},
               {"nu_target", c.loss.nu_target},
               {"sign_weight", c.loss.sign_weight ? json(*c.loss.sign_weight) : json(nullptr)},
               {"weight_left", c.loss.weight_left},
               {"weight_right", c.loss.weight_right},
               {"target",
                {{"type", t.type},
                 {"beta", t.beta},
                 {"s0", t.s0 ? json(*t.s0) : json(nullptr)},
                 {"slope", t.slope},
                 {"eps_cr", t.eps_cr},
                 {"samples", t.samples},
                 {"points", points}}}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"budget", o.budget},         {"lr", o.lr},
                    {"restarts", o.restarts},     {"seed", o.seed},
                    {"init_scale", o.init_scale}, {"max_retries", o.max_retries},
                    {"threshold", o.threshold},   {"checkpoint_every", o.checkpoint_every}};
  const auto& v = c.verify;
  j["verify"] = {{"theta_scale", v.theta_scale},
                 {"equivariance_points", v.equivariance_points},
                 {"equivariance_tol", v.equivariance_tol},
                 {"divergence_points", v.divergence_points},
                 {"divergence_tol", v.divergence_tol},
                 {"volume_tol", v.volume_tol},
                 {"mesh_volume_tol", v.mesh_volume_tol},
                 {"gradient_directions", v.gradient_directions},
                 {"gradient_tol", v.gradient_tol}};
  j["output"] = c.output;
  return j.dump(2) + "\n";
}

}  // namespace cellflow

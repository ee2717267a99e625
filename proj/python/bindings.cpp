#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cellflow/config.hpp"
#include "cellflow/errors.hpp"
#include "cellflow/flow.hpp"
#include "cellflow/mechanics.hpp"
#include "cellflow/optimize.hpp"
#include "cellflow/pipeline.hpp"
#include "cellflow/symmetry.hpp"
#include "cellflow/verify.hpp"

namespace py = pybind11;
using namespace cellflow;

namespace {

using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using TriArray = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec2> to_points(const PointArray& a) {
  std::vector<Vec2> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = Vec2(a(i, 0), a(i, 1));
  return out;
}

PointArray from_points(const std::vector<Vec2>& p) {
  PointArray out(static_cast<Eigen::Index>(p.size()), 2);
  for (std::size_t i = 0; i < p.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p[i].transpose();
  return out;
}

TriArray triangles(const Mesh& m) {
  TriArray out(static_cast<Eigen::Index>(m.triangles.size()), 3);
  for (std::size_t i = 0; i < m.triangles.size(); ++i) {
    for (int k = 0; k < 3; ++k) out(static_cast<Eigen::Index>(i), k) = m.triangles[i][static_cast<std::size_t>(k)];
  }
  return out;
}

Mlp network(const MlpArchitecture& arch, const Eigen::VectorXd& params) {
  Mlp net(arch);
  if (static_cast<std::size_t>(params.size()) != net.num_params()) {
    throw py::value_error("expected " + std::to_string(net.num_params()) + " parameters, got " +
                          std::to_string(params.size()));
  }
  net.set_params(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
  return net;
}

Eigen::VectorXd params_of(const Mlp& net) {
  const auto p = net.params();
  return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

py::dict curve_dict(const std::vector<CurveSample>& curve) {
  std::vector<double> eps, s;
  for (const auto& c : curve) {
    eps.push_back(c.strain);
    s.push_back(c.stress);
  }
  py::dict d;
  d["strain"] = eps;
  d["stress"] = s;
  return d;
}

// A configured problem held in memory so repeated evaluations reuse the mesh.
class Design {
 public:
  explicit Design(const std::string& config_json) : setup_(make_setup(parse_config(config_json))) {}

  std::size_t num_params() const { return Mlp(setup_.config.arch).num_params(); }

  Eigen::VectorXd random_params(std::uint64_t seed, double scale) const {
    return params_of(Mlp::random(setup_.config.arch, seed, scale));
  }

  PointArray nodes() const { return from_points(setup_.problem.reference.nodes); }
  TriArray tris() const { return triangles(setup_.problem.reference); }

  PointArray deform(const Eigen::VectorXd& params) const {
    const Problem& p = setup_.problem;
    return from_points(deform_mesh(p.reference, network(setup_.config.arch, params), p.group, p.flow,
                                   p.envelope).mesh.nodes);
  }

  py::dict evaluate(const Eigen::VectorXd& params, bool gradient) const {
    const Mlp net = network(setup_.config.arch, params);
    Evaluation ev = evaluate_loss(net, setup_.problem, setup_.loss);
    py::dict d;
    d["ok"] = ev.ok;
    d["diagnostic"] = ev.diagnostic;
    d["loss"] = ev.loss;
    d["nu_ef"] = ev.nu_ef;
    d["min_angle"] = ev.min_angle;
    d["curve"] = curve_dict(ev.curve);
    if (gradient && ev.ok) d["gradient"] = adjoint_gradient(net, setup_.problem, setup_.loss, ev);
    return d;
  }

  std::optional<double> s0() const { return setup_.s0; }

 private:
  Setup setup_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Symmetry-preserving flows for cellular solid design";

  // translators run newest first, so the derived type is registered last
  py::register_exception<Error>(m, "CellflowError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("group_names", [] {
    std::vector<std::string> out;
    for (auto n : group_names()) out.emplace_back(n);
    return out;
  });
  m.def("group_info", [](const std::string& name) {
    const WallpaperGroup g = lookup_group(name);
    py::dict d;
    d["name"] = g.name();
    d["lattice"] = std::string(to_string(g.lattice_kind()));
    d["order"] = g.order();
    return d;
  }, py::arg("name"));

  m.def("random_params", [](std::uint64_t seed, double scale, std::vector<int> hidden) {
    MlpArchitecture arch;
    arch.hidden = std::move(hidden);
    return params_of(Mlp::random(arch, seed, scale));
  }, py::arg("seed"), py::arg("scale") = 0.1, py::arg("hidden") = std::vector<int>{10, 10});

  m.def("velocity", [](const std::string& group, const Eigen::VectorXd& params, const PointArray& x, double t,
                       std::vector<int> hidden, double scale) {
    MlpArchitecture arch;
    arch.hidden = std::move(hidden);
    const Mlp net = network(arch, params);
    const WallpaperGroup g = lookup_group(group, scale);
    const FlowField field(g, net);
    std::vector<Vec2> out;
    for (const auto& p : to_points(x)) out.push_back(field.velocity(p, t));
    return from_points(out);
  }, py::arg("group"), py::arg("params"), py::arg("x"), py::arg("t") = 0.0,
     py::arg("hidden") = std::vector<int>{10, 10}, py::arg("scale") = 1.0);

  m.def("flow_points", [](const std::string& group, const Eigen::VectorXd& params, const PointArray& x,
                          double t_max, int n_steps, std::vector<int> hidden, double scale) {
    MlpArchitecture arch;
    arch.hidden = std::move(hidden);
    const Mlp net = network(arch, params);
    const WallpaperGroup g = lookup_group(group, scale);
    return from_points(flow_points(net, g, to_points(x), 0.0, t_max, n_steps));
  }, py::arg("group"), py::arg("params"), py::arg("x"), py::arg("t_max") = 1.0, py::arg("n_steps") = 32,
     py::arg("hidden") = std::vector<int>{10, 10}, py::arg("scale") = 1.0);

  m.def("psi", [](const Eigen::Matrix2d& F, double E, double nu) { return psi(F, Material{E, nu}); },
        py::arg("F"), py::arg("E") = 1.0, py::arg("nu") = 0.3);

  m.def("normalize_config", [](const std::string& text) { return emit_config(parse_config(text)); },
        py::arg("config_json"));

  m.def("verify", [](const std::string& text) {
    const VerifyReport r = run_verify(parse_config(text));
    py::list out;
    for (const auto& c : r.checks) {
      py::dict d;
      d["name"] = c.name;
      d["passed"] = c.passed;
      d["value"] = c.value;
      d["tolerance"] = c.tolerance;
      d["detail"] = c.detail;
      out.append(d);
    }
    return out;
  }, py::arg("config_json"));

  m.def("design", [](const std::string& text, const std::string& out_dir) {
    RunConfig cfg = parse_config(text);
    DesignSummary s;
    {
      py::gil_scoped_release release;
      s = run_design(cfg, out_dir.empty() ? cfg.output : out_dir, nullptr);
    }
    py::dict d;
    d["reference_loss"] = s.reference_loss;
    d["reference_nu_ef"] = s.reference_nu_ef;
    d["best_loss"] = s.best_loss;
    d["best_nu_ef"] = s.best_nu_ef;
    d["best_restart"] = s.best_restart;
    d["steps"] = s.steps;
    d["rejected"] = s.rejected;
    d["s0"] = s.s0;
    return d;
  }, py::arg("config_json"), py::arg("out_dir") = "");

  m.def("simulate", [](const std::string& text, const std::string& checkpoint, const std::string& out_dir) {
    RunConfig cfg = parse_config(text);
    SimulateSummary s;
    {
      py::gil_scoped_release release;
      s = run_simulate(cfg, checkpoint, out_dir.empty() ? cfg.output : out_dir);
    }
    py::dict d;
    d["nu_ef"] = s.nu_ef;
    d["curve"] = curve_dict(s.curve);
    return d;
  }, py::arg("config_json"), py::arg("checkpoint") = "", py::arg("out_dir") = "");

  py::class_<Design>(m, "Design")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def_property_readonly("num_params", &Design::num_params)
      .def_property_readonly("nodes", &Design::nodes)
      .def_property_readonly("triangles", &Design::tris)
      .def_property_readonly("s0", &Design::s0)
      .def("random_params", &Design::random_params, py::arg("seed"), py::arg("scale") = 0.1)
      .def("deform", &Design::deform, py::arg("params"))
      .def("evaluate", &Design::evaluate, py::arg("params"), py::arg("gradient") = false);
}

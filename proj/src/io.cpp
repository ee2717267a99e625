#include "cellflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cellflow/errors.hpp"
#include "json.hpp"

namespace cellflow {

using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

constexpr double kCanvas = 800.0;

struct Canvas {
  Vec2 lo;
  double scale = 1.0;
  Vec2 offset = Vec2::Zero();

  explicit Canvas(const SvgView& v) : lo(v.lo) {
    const Vec2 size = v.hi - v.lo;
    scale = kCanvas / std::max(size.x(), size.y());
    offset = 0.5 * (Vec2(kCanvas, kCanvas) - scale * size);
  }
  Vec2 map(const Vec2& p) const {
    const Vec2 q = scale * (p - lo) + offset;
    return {q.x(), kCanvas - q.y()};
  }
};

std::string svg_open() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"0 0 800 800\">\n"
         "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
}

}  // namespace

Checkpoint make_checkpoint(const Mlp& net, std::uint64_t seed, int step, double best_loss,
                           const std::string& config_json) {
  Checkpoint cp;
  cp.arch = net.architecture();
  cp.params.assign(net.params().begin(), net.params().end());
  cp.seed = seed;
  cp.step = step;
  cp.best_loss = best_loss;
  cp.config = config_json;
  return cp;
}

std::string checkpoint_to_json(const Checkpoint& cp) {
  json j;
  j["architecture"] = {{"input_dim", cp.arch.input_dim},
                       {"hidden", cp.arch.hidden},
                       {"output_dim", cp.arch.output_dim},
                       {"activation", "tanh"}};
  j["params"] = cp.params;
  j["seed"] = cp.seed;
  j["step"] = cp.step;
  j["best_loss"] = std::isfinite(cp.best_loss) ? json(cp.best_loss) : json(nullptr);
  j["config"] = cp.config.empty() ? json(nullptr) : json::parse(cp.config);
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint cp;
  try {
    const json j = json::parse(text);
    const json& a = j.at("architecture");
    cp.arch.input_dim = a.at("input_dim").get<int>();
    cp.arch.hidden = a.at("hidden").get<std::vector<int>>();
    cp.arch.output_dim = a.at("output_dim").get<int>();
    if (a.contains("activation") && a["activation"] != "tanh") {
      throw CheckpointMismatchError("checkpoint activation is not tanh");
    }
    cp.params = j.at("params").get<std::vector<double>>();
    cp.seed = j.value("seed", std::uint64_t{0});
    cp.step = j.value("step", 0);
    cp.best_loss = j.contains("best_loss") && j["best_loss"].is_number()
                       ? j["best_loss"].get<double>()
                       : std::numeric_limits<double>::infinity();
    if (j.contains("config") && !j["config"].is_null()) cp.config = j["config"].dump();
  } catch (const json::exception& e) {
    throw CheckpointMismatchError(std::string("malformed checkpoint: ") + e.what());
  }
  return cp;
}

void write_checkpoint(const std::string& path, const Checkpoint& cp) {
  write_text(path, checkpoint_to_json(cp));
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointMismatchError("cannot read checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

Mlp checkpoint_network(const Checkpoint& cp, const MlpArchitecture& expected) {
  if (!(cp.arch == expected)) {
    throw CheckpointMismatchError("checkpoint architecture differs from the configured network");
  }
  Mlp net(expected);
  if (cp.params.size() != net.num_params()) {
    throw CheckpointMismatchError("checkpoint has " + std::to_string(cp.params.size()) +
                                  " parameters, network needs " + std::to_string(net.num_params()));
  }
  net.set_params(cp.params);
  return net;
}

void write_mesh(std::ostream& out, const Mesh& mesh, const Eigen::VectorXd* u) {
  if (u && u->size() != 2 * static_cast<Eigen::Index>(mesh.nodes.size())) {
    throw std::invalid_argument("displacement size does not match the mesh");
  }
  out << mesh.nodes.size() << ' ' << mesh.triangles.size() << '\n';
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    out << num(mesh.nodes[i].x()) << ' ' << num(mesh.nodes[i].y());
    if (u) out << ' ' << num((*u)[2 * i]) << ' ' << num((*u)[2 * i + 1]);
    out << '\n';
  }
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

MeshFile read_mesh(std::istream& in) {
  MeshFile f;
  std::string line;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    throw MeshingError("mesh file ended early");
  };
  next_line();
  long n = -1, m = -1;
  {
    std::istringstream hs(line);
    if (!(hs >> n >> m) || n < 3 || m < 1) throw MeshingError("bad mesh header");
  }
  f.mesh.nodes.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    next_line();
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) throw MeshingError("bad node line " + std::to_string(i));
    f.mesh.nodes[static_cast<std::size_t>(i)] = {x, y};
    double ux, uy;
    if (ls >> ux >> uy) {
      if (i == 0) f.u = Eigen::VectorXd::Zero(2 * n);
      if (f.u.size() == 0) throw MeshingError("displacement columns on some nodes only");
      f.u[2 * i] = ux;
      f.u[2 * i + 1] = uy;
    } else if (f.u.size() != 0) {
      throw MeshingError("displacement columns on some nodes only");
    }
  }
  f.mesh.triangles.resize(static_cast<std::size_t>(m));
  for (long t = 0; t < m; ++t) {
    next_line();
    std::istringstream ls(line);
    auto& tri = f.mesh.triangles[static_cast<std::size_t>(t)];
    if (!(ls >> tri[0] >> tri[1] >> tri[2])) throw MeshingError("bad triangle line " + std::to_string(t));
    for (int v : tri) {
      if (v < 0 || v >= n) throw MeshingError("triangle index out of range");
    }
  }
  Vec2 lo = f.mesh.nodes[0], hi = f.mesh.nodes[0];
  for (const auto& p : f.mesh.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  f.mesh.lo = lo;
  f.mesh.hi = hi;
  f.mesh.classify();
  return f;
}

void write_curve_csv(std::ostream& out, const std::vector<CurveSample>& curve) {
  out << "epsilon,S\n";
  for (const auto& s : curve) out << num(s.strain) << ',' << num(s.stress) << '\n';
}

void write_history_csv(std::ostream& out, const std::vector<HistoryEntry>& history) {
  out << "step,loss,nu_ef\n";
  for (const auto& h : history) out << h.step << ',' << num(h.loss) << ',' << num(h.nu_ef) << '\n';
}

std::vector<std::vector<int>> boundary_loops(const Mesh& mesh) {
  std::map<int, int> next;
  for (const auto& e : mesh.boundary) next[e.a] = e.b;
  std::vector<std::vector<int>> loops;
  while (!next.empty()) {
    std::vector<int> loop;
    const int start = next.begin()->first;
    int v = start;
    do {
      loop.push_back(v);
      const auto it = next.find(v);
      if (it == next.end()) throw MeshingError("open boundary chain");
      v = it->second;
      next.erase(it);
    } while (v != start);
    loops.push_back(std::move(loop));
  }
  return loops;
}

SvgView default_view(const Mesh& mesh) {
  const double pad = 0.15 * std::max(mesh.width(), mesh.height());
  return {mesh.lo - Vec2(pad, pad), mesh.hi + Vec2(pad, pad)};
}

std::string render_mesh_svg(const Mesh& mesh, const SvgView& view, bool draw_triangles) {
  const Canvas c(view);
  std::string s = svg_open();
  s += "<path fill=\"#4a6fa5\" fill-rule=\"evenodd\" stroke=\"#1d2d44\" stroke-width=\"1\" d=\"";
  for (const auto& loop : boundary_loops(mesh)) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Vec2 p = c.map(mesh.nodes[static_cast<std::size_t>(loop[i])]);
      s += (i == 0 ? "M" : "L") + fixed(p.x()) + "," + fixed(p.y()) + " ";
    }
    s += "Z ";
  }
  s += "\"/>\n";
  if (draw_triangles) {
    s += "<g fill=\"none\" stroke=\"#dfe7f2\" stroke-width=\"0.4\">\n";
    for (const auto& t : mesh.triangles) {
      s += "<path d=\"";
      for (int i = 0; i < 3; ++i) {
        const Vec2 p = c.map(mesh.nodes[static_cast<std::size_t>(t[i])]);
        s += (i == 0 ? "M" : "L") + fixed(p.x()) + "," + fixed(p.y()) + " ";
      }
      s += "Z\"/>\n";
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string render_quiver_svg(const Mlp& net, const WallpaperGroup& g, const Envelope& env,
                              const Vec2& lo, const Vec2& hi, double t, int n) {
  if (n < 2) throw std::invalid_argument("quiver grid needs at least 2 points per side");
  const FlowField field(g, net, env);
  std::vector<Vec2> pts, vel;
  double vmax = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 x(lo.x() + (hi.x() - lo.x()) * (i + 0.5) / n, lo.y() + (hi.y() - lo.y()) * (j + 0.5) / n);
      const Vec2 v = field.velocity(x, t);
      pts.push_back(x);
      vel.push_back(v);
      vmax = std::max(vmax, v.norm());
    }
  }
  const SvgView view{lo, hi};
  const Canvas c(view);
  // longest arrow spans 90% of a grid cell
  const double cell = std::max(hi.x() - lo.x(), hi.y() - lo.y()) / n;
  const double len = vmax > 0.0 ? 0.9 * cell / vmax : 0.0;
  std::string s = svg_open();
  s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"none\" stroke=\"#888\"/>\n";
  s += "<g stroke=\"#c0392b\" stroke-width=\"1.2\" fill=\"none\">\n";
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Vec2 a = c.map(pts[k]);
    const Vec2 b = c.map(pts[k] + len * vel[k]);
    const Vec2 d = b - a;
    if (d.norm() < 0.5) continue;
    const Vec2 u = d.normalized();
    const Vec2 w(-u.y(), u.x());
    const double head = std::min(5.0, 0.35 * d.norm());
    const Vec2 h1 = b - head * u + 0.5 * head * w;
    const Vec2 h2 = b - head * u - 0.5 * head * w;
    s += "<path d=\"M" + fixed(a.x()) + "," + fixed(a.y()) + " L" + fixed(b.x()) + "," + fixed(b.y()) +
         " M" + fixed(h1.x()) + "," + fixed(h1.y()) + " L" + fixed(b.x()) + "," + fixed(b.y()) + " L" +
         fixed(h2.x()) + "," + fixed(h2.y()) + "\"/>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace cellflow

#include "cellflow/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace cellflow {

Mlp::Mlp(MlpArchitecture arch) : arch_(std::move(arch)) {
  if (arch_.input_dim <= 0 || arch_.output_dim <= 0) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  std::vector<int> dims;
  dims.push_back(arch_.input_dim);
  for (int h : arch_.hidden) {
    if (h <= 0) throw std::invalid_argument("hidden layer width must be positive");
    dims.push_back(h);
  }
  dims.push_back(arch_.output_dim);

  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w = offset;
    offset += static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out);
    layer.b = offset;
    offset += static_cast<std::size_t>(layer.out);
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::random(MlpArchitecture arch, std::uint64_t seed, double scale) {
  Mlp net(std::move(arch));
  std::mt19937_64 gen(seed);
  for (const auto& layer : net.layers_) {
    for (std::size_t i = layer.w; i < layer.b; ++i) {
      // 53-bit mantissa mapping keeps draws identical across standard libraries
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      net.params_[i] = scale * (2.0 * u - 1.0);
    }
  }
  return net;
}

void Mlp::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw std::invalid_argument("parameter count mismatch: expected " +
                                std::to_string(params_.size()) + ", got " +
                                std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

bool Mlp::all_finite() const {
  for (double p : params_) {
    if (!std::isfinite(p)) return false;
  }
  return true;
}

Eigen::VectorXd Mlp::eval(const Eigen::VectorXd& u) const {
  if (u.size() != arch_.input_dim) {
    throw std::invalid_argument("network input has dimension " + std::to_string(u.size()) +
                                ", expected " + std::to_string(arch_.input_dim));
  }
  Eigen::VectorXd a = u;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        params_.data() + layer.w, layer.out, layer.in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + layer.b, layer.out);
    Eigen::VectorXd z = w * a + b;
    a = (l + 1 < layers_.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::input_jacobian(const Eigen::VectorXd& u) const {
  if (u.size() != arch_.input_dim) {
    throw std::invalid_argument("network input has dimension " + std::to_string(u.size()) +
                                ", expected " + std::to_string(arch_.input_dim));
  }
  Eigen::VectorXd a = u;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(u.size(), u.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        params_.data() + layer.w, layer.out, layer.in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + layer.b, layer.out);
    Eigen::VectorXd z = w * a + b;
    jac = w * jac;
    if (l + 1 < layers_.size()) {
      a = z.array().tanh();
      jac = (1.0 - a.array().square()).matrix().asDiagonal() * jac;
    } else {
      a = z;
    }
  }
  return jac;
}

void Mlp::prepare(MlpWorkspace& ws) const {
  const std::size_t n = layers_.size() + 1;
  if (ws.a.size() == n) return;
  ws.a.assign(n, {});
  ws.da.assign(n, {});
  ws.dz.assign(n, {});
  int widest = arch_.input_dim;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    ws.a[l].resize(layers_[l].in);
    ws.da[l].resize(layers_[l].in);
    ws.dz[l].resize(layers_[l].in);
    widest = std::max(widest, layers_[l].out);
  }
  ws.a[n - 1].resize(arch_.output_dim);
  ws.da[n - 1].resize(arch_.output_dim);
  ws.bar.resize(widest);
  ws.dbar.resize(widest);
  ws.next_bar.resize(widest);
  ws.next_dbar.resize(widest);
}

double Mlp::value_and_gradient(const double* u, double* grad_u, MlpWorkspace& ws) const {
  prepare(ws);
  const std::size_t nl = layers_.size();
  std::copy(u, u + arch_.input_dim, ws.a[0].begin());
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& layer = layers_[l];
    const double* w = params_.data() + layer.w;
    const double* b = params_.data() + layer.b;
    const double* a = ws.a[l].data();
    double* next = ws.a[l + 1].data();
    for (int i = 0; i < layer.out; ++i) {
      double z = b[i];
      const double* row = w + static_cast<std::size_t>(i) * layer.in;
      for (int j = 0; j < layer.in; ++j) z += row[j] * a[j];
      next[i] = (l + 1 < nl) ? std::tanh(z) : z;
    }
  }
  const double value = ws.a[nl][0];

  // reverse sweep from the scalar output
  double* bar = ws.bar.data();
  double* next_bar = ws.next_bar.data();
  bar[0] = 1.0;
  for (std::size_t l = nl; l-- > 0;) {
    const auto& layer = layers_[l];
    const double* w = params_.data() + layer.w;
    for (int j = 0; j < layer.in; ++j) next_bar[j] = 0.0;
    for (int i = 0; i < layer.out; ++i) {
      const double zb = bar[i];
      if (zb == 0.0) continue;
      const double* row = w + static_cast<std::size_t>(i) * layer.in;
      for (int j = 0; j < layer.in; ++j) next_bar[j] += row[j] * zb;
    }
    if (l > 0) {
      const double* a = ws.a[l].data();
      for (int j = 0; j < layer.in; ++j) next_bar[j] *= 1.0 - a[j] * a[j];
    }
    std::swap(bar, next_bar);
  }
  std::copy(bar, bar + arch_.input_dim, grad_u);
  return value;
}

double Mlp::jvp(const double* u, const double* du, double& dout, MlpWorkspace& ws) const {
  prepare(ws);
  const std::size_t nl = layers_.size();
  std::copy(u, u + arch_.input_dim, ws.a[0].begin());
  std::copy(du, du + arch_.input_dim, ws.da[0].begin());
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& layer = layers_[l];
    const double* w = params_.data() + layer.w;
    const double* b = params_.data() + layer.b;
    const double* a = ws.a[l].data();
    const double* da = ws.da[l].data();
    double* next = ws.a[l + 1].data();
    double* dnext = ws.da[l + 1].data();
    for (int i = 0; i < layer.out; ++i) {
      double z = b[i];
      double dz = 0.0;
      const double* row = w + static_cast<std::size_t>(i) * layer.in;
      for (int j = 0; j < layer.in; ++j) {
        z += row[j] * a[j];
        dz += row[j] * da[j];
      }
      if (l + 1 < nl) {
        const double t = std::tanh(z);
        next[i] = t;
        ws.dz[l + 1][i] = dz;
        dnext[i] = (1.0 - t * t) * dz;
      } else {
        next[i] = z;
        dnext[i] = dz;
      }
    }
  }
  dout = ws.da[nl][0];
  return ws.a[nl][0];
}

void Mlp::jvp_backward(MlpWorkspace& ws, double value_bar, double tangent_bar,
                       double* param_grad, double* u_bar, double* du_bar) const {
  const std::size_t nl = layers_.size();
  double* zb = ws.bar.data();
  double* dzb = ws.dbar.data();
  double* ab = ws.next_bar.data();
  double* dab = ws.next_dbar.data();
  zb[0] = value_bar;
  dzb[0] = tangent_bar;

  for (std::size_t l = nl; l-- > 0;) {
    const auto& layer = layers_[l];
    const double* w = params_.data() + layer.w;
    const double* a = ws.a[l].data();
    const double* da = ws.da[l].data();
    for (int j = 0; j < layer.in; ++j) {
      ab[j] = 0.0;
      dab[j] = 0.0;
    }
    for (int i = 0; i < layer.out; ++i) {
      const double zi = zb[i];
      const double dzi = dzb[i];
      const double* row = w + static_cast<std::size_t>(i) * layer.in;
      if (param_grad != nullptr) {
        double* gw = param_grad + layer.w + static_cast<std::size_t>(i) * layer.in;
        for (int j = 0; j < layer.in; ++j) gw[j] += zi * a[j] + dzi * da[j];
        param_grad[layer.b + i] += zi;
      }
      for (int j = 0; j < layer.in; ++j) {
        ab[j] += row[j] * zi;
        dab[j] += row[j] * dzi;
      }
    }
    if (l == 0) {
      std::copy(ab, ab + layer.in, u_bar);
      std::copy(dab, dab + layer.in, du_bar);
      return;
    }
    // a = tanh(z_prev), da = (1 - a^2) dz_prev
    const double* dz_prev = ws.dz[l].data();
    for (int j = 0; j < layer.in; ++j) {
      const double s = 1.0 - a[j] * a[j];
      const double abar = ab[j] + dab[j] * dz_prev[j] * (-2.0 * a[j]);
      dzb[j] = dab[j] * s;
      zb[j] = abar * s;
    }
  }
}

}  // namespace cellflow

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cellflow {

/// Fully connected tanh network: input -> hidden... -> linear output.
struct MlpArchitecture {
  int input_dim = 5;
  std::vector<int> hidden = {10, 10};
  int output_dim = 1;

  bool operator==(const MlpArchitecture&) const = default;
};

/// Scratch buffers for the scalar fast paths; one per thread.
struct MlpWorkspace {
  std::vector<std::vector<double>> a;   // layer activations, a[0] is the input
  std::vector<std::vector<double>> da;  // tangents of the activations
  std::vector<std::vector<double>> dz;  // tangents of the pre-activations
  std::vector<double> bar, dbar, next_bar, next_dbar;
};

/// Weights and biases of the stream-potential network, stored as one flat
/// array: for each layer the row-major weight matrix followed by the bias.
class Mlp {
 public:
  explicit Mlp(MlpArchitecture arch = {});

  /// Uniform weights in [-scale, scale], zero biases, from a fixed seed.
  static Mlp random(MlpArchitecture arch, std::uint64_t seed, double scale = 0.1);

  const MlpArchitecture& architecture() const noexcept { return arch_; }
  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  Eigen::Map<const Eigen::VectorXd> param_vector() const {
    return {params_.data(), static_cast<Eigen::Index>(params_.size())};
  }
  void set_params(std::span<const double> values);

  bool all_finite() const;

  /// Forward pass; throws std::invalid_argument on a dimension mismatch.
  Eigen::VectorXd eval(const Eigen::VectorXd& u) const;

  /// d output / d input (output_dim x input_dim).
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& u) const;

  void prepare(MlpWorkspace& ws) const;

  /// Scalar network only: value and gradient with respect to the input.
  double value_and_gradient(const double* u, double* grad_u, MlpWorkspace& ws) const;

  /// Scalar network only: forward pass with a tangent du. Returns the value,
  /// writes the directional derivative to dout and leaves the activations in
  /// ws for jvp_backward.
  double jvp(const double* u, const double* du, double& dout, MlpWorkspace& ws) const;

  /// Reverse pass through the last jvp call. Seeds are the adjoints of the
  /// value and of its tangent. Accumulates into param_grad (may be null) and
  /// writes the adjoints of u and du.
  void jvp_backward(MlpWorkspace& ws, double value_bar, double tangent_bar, double* param_grad,
                    double* u_bar, double* du_bar) const;

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t w = 0;  // offset of the weight block
    std::size_t b = 0;  // offset of the bias block
  };

  MlpArchitecture arch_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

}  // namespace cellflow

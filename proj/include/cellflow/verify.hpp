#pragma once

#include <string>
#include <vector>

#include "cellflow/config.hpp"

namespace cellflow {

struct PropertyCheck {
  std::string name;  // equivariance | divergence | volume | mesh_volume | gradient
  bool passed = false;
  double value = 0.0;      // worst observed error
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyCheck> checks;

  bool passed() const;
  /// First failing check, or null.
  const PropertyCheck* first_failure() const;
};

/// Runs the invariant suites for the configured group with random flow
/// parameters of scale cfg.verify.theta_scale seeded by cfg.optimizer.seed.
VerifyReport run_verify(const RunConfig& cfg);

}  // namespace cellflow

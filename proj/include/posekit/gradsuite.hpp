#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace posekit {

/// One operator's aggregate over all its random configurations.
struct GradOpReport {
  std::string op;
  int configs = 0;
  double worst_rel_err = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

struct GradSuiteReport {
  std::vector<GradOpReport> ops;
  double seconds = 0.0;
  bool pass = false;
};

/// Finite-difference audit of the differentiable operators and their
/// compositions: conv2d, relu, bilinear_sample, deformable_pose_conv, the
/// upsample/add fusion step, the combined training loss, and the full
/// forward-loss-backward head. Each operator is checked on
/// `configs_per_op` random shape/value configurations with central
/// differences at eps 1e-4; an operator passes when every configuration's
/// maximum relative error stays within `tol`. Deterministic from `seed`
/// regardless of the thread budget.
GradSuiteReport run_gradient_suite(int configs_per_op, double tol, uint64_t seed);

}  // namespace posekit

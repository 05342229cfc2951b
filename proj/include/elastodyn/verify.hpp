#pragma once

// Self-checks shared by `elastodyn verify` and the acceptance runner.

#include "elastodyn/scenarios.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace elastodyn::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity (error, ratio, ...)
  double tolerance = 0.0;  // threshold it is compared against
  std::string detail;
};

/// Test fixture hook: multiplies the density scale the plane-wave residual
/// check passes to the residual operators, which perturbs only the inertia
/// prefactor. 1 leaves the check untouched.
struct FaultInjection {
  double inertia_factor = 1.0;
};

/// Relative error with a floor that keeps round-off in near-zero entries
/// from dominating: |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor);

/// Parameter gradients of the full 2D loss (data + five residuals, forward,
/// inverse and hard-constraint variants) of `draws` random 2-layer, 8-neuron
/// networks against central differences with step 1e-5.
CheckResult parameter_gradients(int draws = 20, std::uint64_t seed = 1, double tolerance = 1e-4);

/// First and second input derivatives of the same networks against central
/// differences with step 1e-3, as max |jet - fd| / max |fd| per derivative
/// block (network, direction, order).
CheckResult input_derivatives(int draws = 20, std::uint64_t seed = 2, double tolerance = 1e-4);

/// P, S and superposed plane waves give 2D and 3D residuals below the
/// tolerance at `points` LHS collocation points.
CheckResult plane_wave_residuals(std::size_t points = 1000, std::uint64_t seed = 3,
                                 double tolerance = 1e-10, const FaultInjection& fault = {});

CheckResult nrmse_oracle();
CheckResult adam_first_step();
CheckResult lhs_occupancy();
CheckResult lr_schedule_oracle();

/// All checks of the quick level.
std::vector<CheckResult> quick(const FaultInjection& fault = {});

/// Forward desk run: worst displacement NRMSE on the evaluation grid and the
/// trailing/leading loss comparison.
struct ForwardOutcome {
  training::TrainResult result;
  scenarios::DisplacementError error;
  double leading_mean = 0.0;
  double trailing_mean = 0.0;
};
ForwardOutcome run_forward(const scenarios::Scenario& sc);

CheckResult forward_check(const ForwardOutcome& out, double tolerance = 5e-2);

/// Inverse desk run; both recovered parameters within `tolerance` relative.
CheckResult inverse_check(const training::TrainResult& result, const MaterialParams& truth,
                          double tolerance = 0.05);

/// Runs quick plus the forward and inverse trainings.
std::vector<CheckResult> full(const FaultInjection& fault = {},
                              const std::function<void(const CheckResult&)>& progress = {});

}  // namespace elastodyn::verify

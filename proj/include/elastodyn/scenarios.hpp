#pragma once

// Desk-scale problems built on manufactured plane waves: training data,
// evaluation grid, scales and a training configuration for each mode.

#include "elastodyn/data.hpp"
#include "elastodyn/physics.hpp"
#include "elastodyn/training.hpp"

#include <vector>

namespace elastodyn::scenarios {

struct Scenario {
  std::vector<data::PlaneWaveSpec> waves;
  data::ReferenceDataset train;
  data::ReferenceDataset eval;
  physics::ScaleSet scales;
  training::TrainConfig config;
  MaterialParams truth;
};

/// 2D P wave plus S wave along x in the soft material, 7% of the boundary
/// nodes of a 61x13x60 grid as data, evaluated on a 51x11x50 grid.
Scenario forward_2d(std::uint64_t seed = 7);

/// 2D standing P and S waves in steel clamped at x = 0 (hard constraint),
/// interior and boundary samples as data, lambda and mu unknown.
Scenario inverse_2d(training::Mapping mapping = training::Mapping::sigmoid, bool hard_bc = true,
                    std::uint64_t seed = 11);

/// 2D S wave along x with mu as an input feature; trained at the given mu
/// values, evaluated at `test_mu` (all MPa). Uses unit residual weights: at
/// this training length the 1e3 momentum weights of
/// LossWeights::surrogate_2d() settle on the zero field.
Scenario surrogate_2d(const std::vector<double>& train_mu = {0.05, 0.1, 0.2},
                      double test_mu = 0.075, std::uint64_t seed = 13);

/// Soft material used by the 2D problems: lambda 0.533334, mu 0.1 MPa,
/// rho 0.92e-6 kg/mm^3.
MaterialParams soft_material();
/// Steel: lambda 115385, mu 76923 MPa, rho 7.85e-6 kg/mm^3.
MaterialParams steel();

/// Scale overrides for fields that vanish identically in `ds`: each borrows
/// the largest scale of its group (displacements or stresses).
physics::ScaleOverrides sibling_overrides(const data::ReferenceDataset& ds);

/// Largest NRMSE over the displacement columns whose reference has a
/// nonzero range, and the per-column values (NaN where skipped).
struct DisplacementError {
  double worst = 0.0;
  std::vector<double> per_field;
};
DisplacementError displacement_nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref, Dim dim);

}  // namespace elastodyn::scenarios

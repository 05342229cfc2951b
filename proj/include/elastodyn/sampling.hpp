#pragma once

// Collocation sampling and data batching.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace elastodyn::sampling {

using Bounds = std::vector<std::pair<double, double>>;

struct CollocationBatch {
  Eigen::MatrixXd points;  // N x d
  Bounds bounds;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dims() const { return points.cols(); }
};

/// Latin hypercube sample: in every dimension each of the n equal strata
/// holds exactly one point, jittered uniformly inside it. Strata are paired
/// across dimensions by independent random permutations.
CollocationBatch lhs(std::size_t n, const Bounds& bounds, std::uint64_t seed);

/// Index of the stratum `v` falls in along [lo, hi] split into n parts.
std::size_t stratum(double v, double lo, double hi, std::size_t n);

/// Shuffled partition of 0..N-1 into ceil(N/B) batches, the last possibly
/// short. The permutation depends on (seed, epoch) only.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t dataset_size, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch = 0);

}  // namespace elastodyn::sampling

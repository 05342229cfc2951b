#include "elastodyn/sampling.hpp"

#include "elastodyn/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace elastodyn::sampling {

CollocationBatch lhs(std::size_t n, const Bounds& bounds, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("lhs: need at least one point");
  if (bounds.empty()) throw std::invalid_argument("lhs: no dimensions");
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const auto [lo, hi] = bounds[d];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw std::invalid_argument("lhs: degenerate bounds in dimension " + std::to_string(d));
    }
  }
  CollocationBatch batch;
  batch.bounds = bounds;
  batch.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bounds.size()));
  Rng rng(seed);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const auto [lo, hi] = bounds[d];
    const auto perm = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(perm[i]) + rng.uniform()) * inv;
      // Keep the point inside its stratum after rounding.
      const double v = std::min(lo + (hi - lo) * u, hi);
      batch.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v;
    }
  }
  return batch;
}

std::size_t stratum(double v, double lo, double hi, std::size_t n) {
  const double u = (v - lo) / (hi - lo) * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(u)));
  return std::min(k, n - 1);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t dataset_size, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("epoch_batches: batch size must be positive");
  if (batch_size > dataset_size) {
    throw std::invalid_argument("epoch_batches: batch size " + std::to_string(batch_size) +
                                " exceeds dataset size " + std::to_string(dataset_size));
  }
  Rng rng(derive_seed(seed, epoch));
  const auto perm = rng.permutation(dataset_size);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(start + batch_size, dataset_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace elastodyn::sampling

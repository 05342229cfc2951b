#include "elastodyn/autodiff/jet.hpp"

#include <string>

namespace elastodyn::ad {

Jet2<double> jet_eval(const JetFunction& f, std::span<const double> point, std::size_t direction) {
  if (direction >= point.size()) {
    throw std::out_of_range("jet_eval: direction " + std::to_string(direction) +
                            " outside a point of dimension " + std::to_string(point.size()));
  }
  std::vector<Jet2<double>> seeds;
  seeds.reserve(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    seeds.push_back({point[i], i == direction ? 1.0 : 0.0, 0.0});
  }
  const Jet2<double> r = f(seeds);
  if (!std::isfinite(r.value) || !std::isfinite(r.d1) || !std::isfinite(r.d2)) {
    throw NonFiniteError("jet_eval", false);
  }
  return r;
}

}  // namespace elastodyn::ad

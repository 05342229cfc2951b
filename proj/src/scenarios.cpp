#include "elastodyn/scenarios.hpp"

#include "elastodyn/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace elastodyn::scenarios {

namespace {

constexpr double kPi = std::numbers::pi;

data::Geometry beam_2d(double t_end) {
  data::Geometry g;
  g.dim = Dim::two;
  g.lo = {0.0, 0.0, 0.0};
  g.hi = {1.0, 0.2, 0.0};
  g.t_lo = 0.0;
  g.t_hi = t_end;
  return g;
}

data::PlaneWaveSpec wave(data::WaveKind kind, double amplitude, double k, int axis, int pol,
                         int sense, double phase, const MaterialParams& m) {
  data::PlaneWaveSpec w;
  w.kind = kind;
  w.amplitude = amplitude;
  w.wavenumber = k;
  w.axis = axis;
  w.polarization = pol;
  w.sense = sense;
  w.phase = phase;
  w.material = m;
  return w;
}

double max_abs(const Eigen::MatrixXd& fields, int col) {
  return fields.col(col).cwiseAbs().maxCoeff();
}

physics::ScaleSet scales_with_fallback(const data::ReferenceDataset& ds, const MaterialParams& m,
                                       std::optional<double> modulus) {
  physics::ScaleOverrides ov = sibling_overrides(ds);
  ov.modulus = modulus;
  return physics::make_scales(ds, ov, m);
}

data::ReferenceDataset sample_everywhere(const data::ReferenceDataset& ds, double fraction,
                                         std::uint64_t seed) {
  return data::concat(data::subsample_boundary(ds, fraction, derive_seed(seed, 1)),
                      data::subsample_interior(ds, fraction, derive_seed(seed, 2)));
}

}  // namespace

physics::ScaleOverrides sibling_overrides(const data::ReferenceDataset& ds) {
  physics::ScaleOverrides ov;
  const auto fs = output_fields(ds.schema.dim);
  const int nu = spatial_dims(ds.schema.dim);
  double u_max = 0.0;
  double s_max = 0.0;
  for (int j = 0; j < static_cast<int>(fs.size()); ++j) {
    (j < nu ? u_max : s_max) = std::max(j < nu ? u_max : s_max, max_abs(ds.fields, j));
  }
  for (int j = 0; j < static_cast<int>(fs.size()); ++j) {
    if (max_abs(ds.fields, j) == 0.0) ov.fields[fs[static_cast<std::size_t>(j)]] = j < nu ? u_max : s_max;
  }
  return ov;
}

MaterialParams soft_material() { return {0.533334, 0.1, 0.92e-6}; }
MaterialParams steel() { return {115385.0, 76923.0, 7.85e-6}; }

Scenario forward_2d(std::uint64_t seed) {
  Scenario sc;
  sc.truth = soft_material();
  const double k = 2.0 * kPi;
  sc.waves = {wave(data::WaveKind::P, 1e-3, k, 0, 0, 1, 0.0, sc.truth),
              wave(data::WaveKind::S, 1e-3, k, 0, 1, 1, 0.3, sc.truth)};
  const auto g = beam_2d(1e-3);
  const auto dense = data::manufactured(sc.waves, g, {61, 13, 1, 60});
  sc.train = data::subsample_boundary(dense, 0.07, derive_seed(seed, 10));
  sc.eval = data::manufactured(sc.waves, g, {51, 11, 1, 50});
  sc.scales = scales_with_fallback(dense, sc.truth, std::nullopt);

  auto& c = sc.config;
  c.mode = training::Mode::forward;
  c.dim = Dim::two;
  c.stages = {{2000, 1e-3}, {1000, 1e-4}};
  c.batch_size = static_cast<std::size_t>(sc.train.size());
  c.n_collocation = 500;
  c.weights = physics::LossWeights::unit(Dim::two);
  c.seed = seed;
  c.hidden = 64;
  c.layers = 4;
  c.material = sc.truth;
  return sc;
}

Scenario inverse_2d(training::Mapping mapping, bool hard_bc, std::uint64_t seed) {
  Scenario sc;
  sc.truth = steel();
  const double k = 1.5 * kPi;
  // Each pair of opposite travelling waves forms a standing wave sin(kx)cos(wt)
  // that vanishes at the clamped end x = 0.
  sc.waves = {wave(data::WaveKind::P, 5e-4, k, 0, 0, 1, 0.0, sc.truth),
              wave(data::WaveKind::P, 5e-4, k, 0, 0, -1, 0.0, sc.truth),
              wave(data::WaveKind::S, 5e-4, k, 0, 1, 1, 0.0, sc.truth),
              wave(data::WaveKind::S, 5e-4, k, 0, 1, -1, 0.0, sc.truth)};
  const auto g = beam_2d(5e-6);
  const auto dense = data::manufactured(sc.waves, g, {26, 6, 1, 25});
  sc.train = sample_everywhere(dense, 0.1, derive_seed(seed, 10));
  sc.eval = data::manufactured(sc.waves, g, {51, 11, 1, 50});
  sc.scales = scales_with_fallback(dense, sc.truth, 150000.0);

  auto& c = sc.config;
  c.mode = training::Mode::inverse;
  c.dim = Dim::two;
  // lambda converges much more slowly than mu; 3000 epochs leave it ~12% low.
  c.stages = {{6000, 1e-3}, {3000, 1e-4}};
  c.batch_size = static_cast<std::size_t>(sc.train.size());
  c.n_collocation = 500;
  c.weights = physics::LossWeights::unit(Dim::two);
  c.seed = seed;
  c.hidden = 64;
  c.layers = 4;
  c.mapping = mapping;
  c.hard_bc = hard_bc;
  c.material = {0.0, 0.0, sc.truth.rho};
  return sc;
}

Scenario surrogate_2d(const std::vector<double>& train_mu, double test_mu, std::uint64_t seed) {
  Scenario sc;
  const MaterialParams base = soft_material();
  const double k = 2.0 * kPi;
  const auto g = beam_2d(1e-3);
  const auto waves_for = [&](double mu) {
    MaterialParams m = base;
    m.mu = mu;
    return std::vector<data::PlaneWaveSpec>{wave(data::WaveKind::S, 1e-3, k, 0, 1, 1, 0.0, m)};
  };

  std::optional<data::ReferenceDataset> all;
  std::optional<data::ReferenceDataset> dense_all;
  for (std::size_t i = 0; i < train_mu.size(); ++i) {
    const auto dense = data::manufactured(waves_for(train_mu[i]), g, {26, 6, 1, 25}, train_mu[i]);
    const auto part = sample_everywhere(dense, 0.1, derive_seed(seed, 10 + i));
    all = all ? data::concat(*all, part) : part;
    dense_all = dense_all ? data::concat(*dense_all, dense) : dense;
  }
  sc.train = *all;
  sc.waves = waves_for(test_mu);
  sc.eval = data::manufactured(sc.waves, g, {51, 11, 1, 50}, test_mu);
  sc.truth = base;
  sc.truth.mu = test_mu;
  sc.scales = scales_with_fallback(*dense_all, base, std::nullopt);

  auto& c = sc.config;
  c.mode = training::Mode::surrogate;
  c.dim = Dim::two;
  c.stages = {{2000, 1e-3}, {1000, 1e-4}};
  c.batch_size = static_cast<std::size_t>(sc.train.size());
  c.n_collocation = 500;
  c.weights = physics::LossWeights::unit(Dim::two);
  c.seed = seed;
  c.hidden = 64;
  c.layers = 4;
  c.material = base;
  return sc;
}

DisplacementError displacement_nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref, Dim dim) {
  DisplacementError e;
  for (int j = 0; j < spatial_dims(dim); ++j) {
    const Eigen::VectorXd p = pred.col(j);
    const Eigen::VectorXd r = ref.col(j);
    if (!(r.maxCoeff() > r.minCoeff())) {
      e.per_field.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double v = data::nrmse({p.data(), static_cast<std::size_t>(p.size())},
                                 {r.data(), static_cast<std::size_t>(r.size())});
    e.per_field.push_back(v);
    e.worst = std::max(e.worst, v);
  }
  return e;
}

}  // namespace elastodyn::scenarios

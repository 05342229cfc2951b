#include "elastodyn/data.hpp"
#include "elastodyn/physics.hpp"
#include "elastodyn/random.hpp"
#include "elastodyn/sampling.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace elastodyn;
using ad::Jet2;

namespace {

const MaterialParams kSoft{0.533334, 0.1, 0.92e-6};

data::PlaneWaveSpec wave(data::WaveKind kind, int axis, int pol, double phase = 0.0,
                         const MaterialParams& m = kSoft) {
  data::PlaneWaveSpec w;
  w.kind = kind;
  w.amplitude = 1e-3;
  w.wavenumber = 2.0 * std::numbers::pi;
  w.axis = axis;
  w.polarization = pol;
  w.phase = phase;
  w.material = m;
  return w;
}

// Exact field derivatives of a wave superposition at one point.
struct Derivs {
  std::array<double, 9> value{};
  std::array<std::array<double, 9>, 3> d{};  // d/dx, d/dy, d/dz
  std::array<double, 9> tt{};                 // d2/dt2
};

Derivs derivs_at(std::span<const data::PlaneWaveSpec> waves, double x, double y, double z, double t) {
  Derivs out;
  const std::array<double, 4> p{x, y, z, t};
  for (int k = 0; k < 4; ++k) {
    std::array<Jet2<double>, 4> j;
    for (int i = 0; i < 4; ++i) j[static_cast<std::size_t>(i)] = {p[static_cast<std::size_t>(i)], i == k ? 1.0 : 0.0, 0.0};
    const auto f = data::wave_fields<Jet2<double>>(waves, j[0], j[1], j[2], j[3]);
    for (std::size_t q = 0; q < 9; ++q) {
      out.value[q] = f[q].value;
      if (k < 3) out.d[static_cast<std::size_t>(k)][q] = f[q].d1;
      if (k == 3) out.tt[q] = f[q].d2;
    }
  }
  return out;
}

int idx(Field f) { return static_cast<int>(f); }

physics::PointJets2d<double> jets2d(const Derivs& p, const physics::ScaleSet& s) {
  const auto sv = [&](Field f) { return p.value[static_cast<std::size_t>(idx(f))] / s.field(f); };
  const auto sd = [&](Field f, int a) {
    return p.d[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx(f))] * s.length / s.field(f);
  };
  const auto st = [&](Field f) { return p.tt[static_cast<std::size_t>(idx(f))] * s.time * s.time / s.field(f); };
  physics::PointJets2d<double> j;
  j.sxx = sv(Field::sxx);
  j.syy = sv(Field::syy);
  j.sxy = sv(Field::sxy);
  j.dsxx_dx = sd(Field::sxx, 0);
  j.dsxy_dx = sd(Field::sxy, 0);
  j.dsxy_dy = sd(Field::sxy, 1);
  j.dsyy_dy = sd(Field::syy, 1);
  j.dux_dx = sd(Field::ux, 0);
  j.dux_dy = sd(Field::ux, 1);
  j.duy_dx = sd(Field::uy, 0);
  j.duy_dy = sd(Field::uy, 1);
  j.d2ux_dt2 = st(Field::ux);
  j.d2uy_dt2 = st(Field::uy);
  return j;
}

physics::PointJets3d<double> jets3d(const Derivs& p, const physics::ScaleSet& s) {
  const auto sv = [&](Field f) { return p.value[static_cast<std::size_t>(idx(f))] / s.field(f); };
  const auto sd = [&](Field f, int a) {
    return p.d[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx(f))] * s.length / s.field(f);
  };
  const auto st = [&](Field f) { return p.tt[static_cast<std::size_t>(idx(f))] * s.time * s.time / s.field(f); };
  physics::PointJets3d<double> j;
  j.sxx = sv(Field::sxx);
  j.syy = sv(Field::syy);
  j.szz = sv(Field::szz);
  j.sxy = sv(Field::sxy);
  j.syz = sv(Field::syz);
  j.sxz = sv(Field::sxz);
  j.dsxx_dx = sd(Field::sxx, 0);
  j.dsxy_dx = sd(Field::sxy, 0);
  j.dsxy_dy = sd(Field::sxy, 1);
  j.dsxz_dx = sd(Field::sxz, 0);
  j.dsxz_dz = sd(Field::sxz, 2);
  j.dsyy_dy = sd(Field::syy, 1);
  j.dsyz_dy = sd(Field::syz, 1);
  j.dsyz_dz = sd(Field::syz, 2);
  j.dszz_dz = sd(Field::szz, 2);
  j.dux_dx = sd(Field::ux, 0);
  j.dux_dy = sd(Field::ux, 1);
  j.dux_dz = sd(Field::ux, 2);
  j.duy_dx = sd(Field::uy, 0);
  j.duy_dy = sd(Field::uy, 1);
  j.duy_dz = sd(Field::uy, 2);
  j.duz_dx = sd(Field::uz, 0);
  j.duz_dy = sd(Field::uz, 1);
  j.duz_dz = sd(Field::uz, 2);
  j.d2ux_dt2 = st(Field::ux);
  j.d2uy_dt2 = st(Field::uy);
  j.d2uz_dt2 = st(Field::uz);
  return j;
}

// Scales that keep every normalised quantity of a 1e-3 amplitude wave O(1).
physics::ScaleSet wave_scales(const MaterialParams& m) {
  physics::ScaleSet s;
  s.length = 1.0;
  s.time = 1e-3;
  s.ux = s.uy = s.uz = 1e-3;
  const double sig = (m.lambda + 2 * m.mu) * 1e-3 * 2 * std::numbers::pi;
  s.sxx = s.syy = s.szz = s.sxy = s.syz = s.sxz = sig;
  s.modulus = std::max(m.lambda, m.mu);
  s.density = m.rho;
  return s;
}

double worst_residual_2d(std::span<const data::PlaneWaveSpec> waves, const physics::ScaleSet& s,
                         const MaterialParams& m, std::uint64_t seed) {
  const auto pts = sampling::lhs(1000, {{0, 1}, {0, 0.2}, {0, 1e-3}}, seed);
  const auto sm = physics::scale_material(m, s);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    const auto d = derivs_at(waves, pts.points(i, 0), pts.points(i, 1), 0.0, pts.points(i, 2));
    for (double r : physics::residual_2d<double>(jets2d(d, s), sm, s)) worst = std::max(worst, std::abs(r));
  }
  return worst;
}

data::ReferenceDataset tiny_dataset(const Eigen::MatrixXd& fields) {
  data::ReferenceDataset ds;
  ds.schema = data::Schema::parse("2d");
  ds.coords.resize(fields.rows(), 3);
  for (Eigen::Index i = 0; i < fields.rows(); ++i) ds.coords.row(i) << 0.5 * static_cast<double>(i + 1), 0.1, 1e-3;
  ds.fields = fields;
  return ds;
}

}  // namespace

TEST_CASE("zero fields give zero residuals") {
  physics::ScaleSet s;
  const auto sm = physics::scale_material(kSoft, s);
  physics::PointJets2d<double> j;
  j.sxx = j.syy = j.sxy = 0.0;
  j.dsxx_dx = j.dsxy_dx = j.dsxy_dy = j.dsyy_dy = 0.0;
  j.dux_dx = j.dux_dy = j.duy_dx = j.duy_dy = 0.0;
  j.d2ux_dt2 = j.d2uy_dt2 = 0.0;
  for (double r : physics::residual_2d<double>(j, sm, s)) CHECK(r == 0.0);

  physics::PointJets3d<double> k;
  k.sxx = k.syy = k.szz = k.sxy = k.syz = k.sxz = 0.0;
  k.dsxx_dx = k.dsxy_dx = k.dsxy_dy = k.dsxz_dx = k.dsxz_dz = 0.0;
  k.dsyy_dy = k.dsyz_dy = k.dsyz_dz = k.dszz_dz = 0.0;
  k.dux_dx = k.dux_dy = k.dux_dz = k.duy_dx = k.duy_dy = k.duy_dz = 0.0;
  k.duz_dx = k.duz_dy = k.duz_dz = 0.0;
  k.d2ux_dt2 = k.d2uy_dt2 = k.d2uz_dt2 = 0.0;
  for (double r : physics::residual_3d<double>(k, sm, s)) CHECK(r == 0.0);
}

TEST_CASE("missing derivative is an error") {
  physics::ScaleSet s;
  physics::PointJets2d<double> j;
  j.sxx = j.syy = j.sxy = 0.0;
  CHECK_THROWS_WITH_AS(physics::residual_2d<double>(j, physics::scale_material(kSoft, s), s),
                       doctest::Contains("dsxx/dx"), std::invalid_argument);
}

TEST_CASE("plane waves annihilate the 2D residuals") {
  const auto s = wave_scales(kSoft);
  const std::vector<data::PlaneWaveSpec> p{wave(data::WaveKind::P, 0, 0)};
  const std::vector<data::PlaneWaveSpec> sw{wave(data::WaveKind::S, 0, 1, 0.4)};
  const std::vector<data::PlaneWaveSpec> both{wave(data::WaveKind::P, 1, 1, 0.2), wave(data::WaveKind::S, 0, 1, 1.0)};
  CHECK(worst_residual_2d(p, s, kSoft, 1) < 1e-10);
  CHECK(worst_residual_2d(sw, s, kSoft, 2) < 1e-10);
  CHECK(worst_residual_2d(both, s, kSoft, 3) < 1e-10);
}

TEST_CASE("3D P wave annihilates all nine residuals") {
  const auto s = wave_scales(kSoft);
  const std::vector<data::PlaneWaveSpec> waves{wave(data::WaveKind::P, 0, 0), wave(data::WaveKind::S, 2, 1, 0.5)};
  const auto sm = physics::scale_material(kSoft, s);
  const auto pts = sampling::lhs(500, {{0, 1}, {0, 0.2}, {0, 0.2}, {0, 1e-3}}, 9);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    const auto d = derivs_at(waves, pts.points(i, 0), pts.points(i, 1), pts.points(i, 2), pts.points(i, 3));
    for (double r : physics::residual_3d<double>(jets3d(d, s), sm, s)) worst = std::max(worst, std::abs(r));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("constitutive check u_x* = x*") {
  physics::ScaleSet s;
  s.ux = 2.0;
  s.uy = 3.0;
  s.sxx = 5.0;
  s.length = 0.5;
  s.modulus = 4.0;
  const MaterialParams m{3.0, 1.5, 1.0};
  const auto sm = physics::scale_material(m, s);
  physics::PointJets2d<double> j;
  j.sxx = s.ux * s.modulus / (s.sxx * s.length) * (sm.lambda + 2 * sm.mu);
  j.syy = j.sxy = 0.0;
  j.dsxx_dx = j.dsxy_dx = j.dsxy_dy = j.dsyy_dy = 0.0;
  j.dux_dx = 1.0;
  j.dux_dy = j.duy_dx = j.duy_dy = 0.0;
  j.d2ux_dt2 = j.d2uy_dt2 = 0.0;
  const auto r = physics::residual_2d<double>(j, sm, s);
  CHECK(std::abs(r[2]) < 1e-14);
}

TEST_CASE("3D residuals of a z-independent field agree with 2D") {
  auto s = wave_scales(kSoft);
  s.uz = s.uy;
  const std::vector<data::PlaneWaveSpec> waves{wave(data::WaveKind::P, 0, 0, 0.3), wave(data::WaveKind::S, 0, 1, 0.9)};
  // Perturb the fields so the comparison is not between two zeros.
  const auto sm = physics::scale_material(kSoft, s);
  for (double x : {0.1, 0.45, 0.8}) {
    const auto d = derivs_at(waves, x, 0.05, 0.0, 3e-4);
    auto j2 = jets2d(d, s);
    auto j3 = jets3d(d, s);
    j2.sxx = j2.sxx + 0.1;
    j3.sxx = j3.sxx + 0.1;
    j2.duy_dx = *j2.duy_dx - 0.05;
    j3.duy_dx = *j3.duy_dx - 0.05;
    const auto r2 = physics::residual_2d<double>(j2, sm, s);
    const auto r3 = physics::residual_3d<double>(j3, sm, s);
    const std::array<int, 5> map{0, 1, 3, 4, 6};
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(std::abs(r2[k] - r3[static_cast<std::size_t>(map[k])]) <= 1e-12 * std::max(1.0, std::abs(r2[k])));
    }
  }
}

TEST_CASE("residuals vanish for any positive scales") {
  const std::vector<data::PlaneWaveSpec> waves{wave(data::WaveKind::P, 0, 0), wave(data::WaveKind::S, 0, 1, 0.7)};
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = wave_scales(kSoft);
    const auto jitter = [&] { return std::exp(rng.uniform(-1.0, 1.0)); };
    s.length *= jitter();
    s.time *= jitter();
    s.ux *= jitter();
    s.uy *= jitter();
    s.sxx *= jitter();
    s.syy *= jitter();
    s.sxy *= jitter();
    s.modulus *= jitter();
    s.density *= jitter();
    CHECK(worst_residual_2d(waves, s, kSoft, static_cast<std::uint64_t>(trial)) < 1e-10);
  }
}

TEST_CASE("scaling an exact solution keeps it exact") {
  auto waves = std::vector<data::PlaneWaveSpec>{wave(data::WaveKind::P, 0, 0), wave(data::WaveKind::S, 0, 1, 0.7)};
  for (auto& w : waves) w.amplitude *= 7.5;
  CHECK(worst_residual_2d(waves, wave_scales(kSoft), kSoft, 4) < 1e-10);
}

TEST_CASE("x-y swap symmetry") {
  physics::ScaleSet s;
  s.ux = s.uy = 2.0;
  s.sxx = s.syy = s.sxy = 3.0;
  s.modulus = 1.5;
  s.time = 0.2;
  s.density = 0.7;
  const auto sm = physics::scale_material({1.2, 0.8, 0.9}, s);
  Rng rng(3);
  physics::PointJets2d<double> a;
  a.sxx = rng.uniform(-1, 1);
  a.syy = rng.uniform(-1, 1);
  a.sxy = rng.uniform(-1, 1);
  a.dsxx_dx = rng.uniform(-1, 1);
  a.dsxy_dx = rng.uniform(-1, 1);
  a.dsxy_dy = rng.uniform(-1, 1);
  a.dsyy_dy = rng.uniform(-1, 1);
  a.dux_dx = rng.uniform(-1, 1);
  a.dux_dy = rng.uniform(-1, 1);
  a.duy_dx = rng.uniform(-1, 1);
  a.duy_dy = rng.uniform(-1, 1);
  a.d2ux_dt2 = rng.uniform(-1, 1);
  a.d2uy_dt2 = rng.uniform(-1, 1);
  physics::PointJets2d<double> b;  // x <-> y, u_x <-> u_y, s_xx <-> s_yy
  b.sxx = a.syy;
  b.syy = a.sxx;
  b.sxy = a.sxy;
  b.dsxx_dx = a.dsyy_dy;
  b.dsyy_dy = a.dsxx_dx;
  b.dsxy_dx = a.dsxy_dy;
  b.dsxy_dy = a.dsxy_dx;
  b.dux_dx = a.duy_dy;
  b.duy_dy = a.dux_dx;
  b.dux_dy = a.duy_dx;
  b.duy_dx = a.dux_dy;
  b.d2ux_dt2 = a.d2uy_dt2;
  b.d2uy_dt2 = a.d2ux_dt2;
  const auto ra = physics::residual_2d<double>(a, sm, s);
  const auto rb = physics::residual_2d<double>(b, sm, s);
  CHECK(ra[0] == doctest::Approx(rb[1]).epsilon(1e-14));
  CHECK(ra[1] == doctest::Approx(rb[0]).epsilon(1e-14));
  CHECK(ra[2] == doctest::Approx(rb[3]).epsilon(1e-14));
  CHECK(ra[3] == doctest::Approx(rb[2]).epsilon(1e-14));
  CHECK(ra[4] == doctest::Approx(rb[4]).epsilon(1e-14));
}

TEST_CASE("source term is subtracted from the momentum residuals") {
  physics::ScaleSet s;
  s.length = 2.0;
  s.sxx = 4.0;
  const auto sm = physics::scale_material(kSoft, s);
  physics::PointJets2d<double> j;
  j.sxx = j.syy = j.sxy = 0.0;
  j.dsxx_dx = 1.0;
  j.dsxy_dx = j.dsxy_dy = j.dsyy_dy = 0.0;
  j.dux_dx = j.dux_dy = j.duy_dx = j.duy_dy = 0.0;
  j.d2ux_dt2 = j.d2uy_dt2 = 0.0;
  const std::array<double, 2> f{0.25, -0.5};
  const auto r = physics::residual_2d<double>(j, sm, s, f);
  CHECK(r[0] == doctest::Approx(0.75));
  CHECK(r[1] == doctest::Approx(0.5));
  CHECK(physics::scaled_momentum_source(2.0, s) == doctest::Approx(-1.0));
}

TEST_CASE("make_scales") {
  Eigen::MatrixXd f(2, 5);
  f << -2, 1, 3, 4, 5, 1, -0.5, -6, 1, -2;
  const auto ds = tiny_dataset(f);
  const auto s = physics::make_scales(ds, {}, kSoft);
  CHECK(s.ux == 2.0);
  CHECK(s.uy == 1.0);
  CHECK(s.sxx == 6.0);
  CHECK(s.sxy == 5.0);
  CHECK(s.length == 1.0);
  CHECK(s.time == 1e-3);
  CHECK(s.modulus == kSoft.lambda);
  CHECK(s.density == kSoft.rho);

  physics::ScaleOverrides ov;
  ov.modulus = 150000.0;
  CHECK(physics::make_scales(ds, ov, kSoft).modulus == 150000.0);

  f.col(4).setZero();
  const auto zero = tiny_dataset(f);
  CHECK_THROWS_WITH_AS(physics::make_scales(zero, {}, kSoft), doctest::Contains("s_xy"), std::invalid_argument);
  ov.fields[Field::sxy] = 1.0;
  CHECK(physics::make_scales(zero, ov, kSoft).sxy == 1.0);
}

TEST_CASE("data_loss") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 1, 2;
  b << 0, 2;
  CHECK(physics::data_loss(a, b)[0] == 0.5);
  CHECK(physics::data_loss(a, a)[0] == 0.0);
  Eigen::MatrixXd one(1, 1), zero(1, 1);
  one << 1;
  zero << 0;
  CHECK(physics::data_loss(one, zero)[0] == 1.0);
  CHECK_THROWS_AS(physics::data_loss(a, one), std::invalid_argument);
}

TEST_CASE("total_loss") {
  const auto w = physics::LossWeights::unit(Dim::two);
  const std::vector<double> zeros(5, 0.0), ones(5, 1.0);
  CHECK(physics::total_loss(zeros, zeros, w).total == 0.0);
  CHECK(physics::total_loss(ones, ones, w).total == 10.0);

  const auto sw = physics::LossWeights::surrogate_2d();
  const std::vector<double> eqn{1e-3, 1e-3, 0, 0, 0};
  CHECK(physics::total_loss(zeros, eqn, sw).total == doctest::Approx(2.0).epsilon(1e-15));

  physics::LossWeights odd = w;
  odd.alpha = {0.5, 2, 3, 0.25, 1};
  odd.data = 0.3;
  odd.equation = 1.7;
  const std::vector<double> d{0.1, 0.2, 0.3, 0.4, 0.5}, e{0.9, 0.8, 0.7, 0.6, 0.5};
  const auto lb = physics::total_loss(d, e, odd);
  double ds = 0, es = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    ds += d[i];
    es += odd.alpha[i] * e[i];
  }
  CHECK(lb.data_total == ds);
  CHECK(lb.eqn_total == es);
  CHECK(lb.total == 0.3 * ds + 1.7 * es);

  odd.alpha[0] = -1;
  CHECK_THROWS_AS(physics::total_loss(d, e, odd), std::invalid_argument);
  const std::vector<double> four(4, 1.0);
  CHECK_THROWS_AS(physics::total_loss(four, e, w), std::invalid_argument);
}

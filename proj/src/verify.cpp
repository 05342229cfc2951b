#include "elastodyn/verify.hpp"

#include "elastodyn/autodiff/jet.hpp"
#include "elastodyn/random.hpp"
#include "elastodyn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace elastodyn::verify {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

CheckResult make(std::string name, double value, double tol, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.value = value;
  r.tolerance = tol;
  r.passed = std::isfinite(value) && value < tol;
  r.detail = detail.empty() ? fmt(value) + " < " + fmt(tol) : std::move(detail);
  return r;
}

// Physical scales of a soft 2D wave problem, each jittered by a factor in
// [0.5, 2] so prefactors differ between draws.
physics::ScaleSet jittered_scales(Rng& rng) {
  const auto j = [&] { return std::exp2(rng.uniform(-1.0, 1.0)); };
  physics::ScaleSet s;
  s.length = 1.0 * j();
  s.time = 1e-3 * j();
  s.ux = 1e-3 * j();
  s.uy = 1e-3 * j();
  s.sxx = 4.6e-3 * j();
  s.syy = 3.4e-3 * j();
  s.sxy = 6.3e-4 * j();
  s.modulus = 0.533334 * j();
  s.density = 0.92e-6 * j();
  return s;
}

struct GradientCase {
  training::TrainConfig config;
  training::TrainablePack pack;
  physics::ScaleSet scales;
  Eigen::MatrixXd data_x;
  Eigen::MatrixXd data_y;
  Eigen::MatrixXd colloc;
};

GradientCase random_case(int draw, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(draw)));
  GradientCase g;
  auto& c = g.config;
  c.mode = draw % 3 == 1 ? training::Mode::inverse : training::Mode::forward;
  c.hard_bc = draw % 3 != 0;
  c.mapping = training::Mapping::sigmoid;
  c.hidden = 8;
  c.layers = 2;
  c.material = scenarios::soft_material();
  c.seed = rng.below(1u << 30);
  c.initial_extra = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  g.pack = training::initial_pack(c);
  // Nonzero biases so every parameter block is exercised.
  Eigen::VectorXd flat = g.pack.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += 0.3 * rng.uniform(-1.0, 1.0);
  g.pack.assign(flat);
  g.scales = jittered_scales(rng);

  const int n = 10;
  g.data_x.resize(n, 3);
  g.data_y.resize(n, 5);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) g.data_x(i, j) = rng.uniform();
    for (int j = 0; j < 5; ++j) g.data_y(i, j) = rng.uniform(-1.0, 1.0);
  }
  g.colloc = sampling::lhs(n, {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, rng.below(1u << 30)).points;
  return g;
}

double loss_at(const GradientCase& g, const Eigen::VectorXd& theta, ad::Tape& tape) {
  training::TrainablePack p = g.pack;
  p.assign(theta);
  return training::evaluate_step(g.config, p, g.scales, g.data_x, g.data_y, g.colloc, tape).loss.total;
}

}  // namespace

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

CheckResult parameter_gradients(int draws, std::uint64_t seed, double tolerance) {
  constexpr double h = 1e-5;
  double worst = 0.0;
  ad::Tape tape;
  for (int d = 0; d < draws; ++d) {
    const GradientCase g = random_case(d, seed);
    const Eigen::VectorXd theta = g.pack.flatten();
    const auto ev = training::evaluate_step(g.config, g.pack, g.scales, g.data_x, g.data_y, g.colloc, tape);
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd tp = theta;
      Eigen::VectorXd tm = theta;
      tp[i] += h;
      tm[i] -= h;
      fd[i] = (loss_at(g, tp, tape) - loss_at(g, tm, tape)) / (2.0 * h);
    }
    const double floor = 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      worst = std::max(worst, relative_error(ev.gradient[i], fd[i], floor));
    }
  }
  return make("parameter gradients vs finite differences", worst, tolerance,
              "max relative error " + fmt(worst) + " over " + std::to_string(draws) + " networks (< " +
                  fmt(tolerance) + ")");
}

CheckResult input_derivatives(int draws, std::uint64_t seed, double tolerance) {
  constexpr double h = 1e-3;
  double worst = 0.0;
  for (int d = 0; d < draws; ++d) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    const network::Dims dims{3, 8, 2, 5};
    network::ModifiedMlpParams p = network::init(dims, rng.below(1u << 30));
    Eigen::VectorXd flat = p.flatten();
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += 0.3 * rng.uniform(-1.0, 1.0);
    p.assign(flat);

    const int n = 5;
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform();
    }
    ad::Tape tape;
    const auto tp = network::bind(tape, p);
    const std::vector<network::JetDirection> dirs{{0, true}, {1, true}, {2, true}};
    const auto jets = network::forward_jets(tp, tape.constant(x), dirs);

    for (int k = 0; k < 3; ++k) {
      Eigen::MatrixXd xp = x;
      Eigen::MatrixXd xm = x;
      xp.col(k).array() += h;
      xm.col(k).array() -= h;
      const Eigen::MatrixXd f0 = network::forward_batch(p, x);
      const Eigen::MatrixXd fp = network::forward_batch(p, xp);
      const Eigen::MatrixXd fm = network::forward_batch(p, xm);
      const Eigen::MatrixXd d1 = (fp - fm) / (2.0 * h);
      const Eigen::MatrixXd d2 = (fp - 2.0 * f0 + fm) / (h * h);
      const auto& j1 = jets.d1[static_cast<std::size_t>(k)].value();
      const auto& j2 = jets.d2[static_cast<std::size_t>(k)]->value();
      // Normwise over each derivative block: the second difference carries an
      // O(h^2) truncation error that is absolute, not relative, so entrywise
      // ratios at isolated near-zero curvatures measure the oracle, not the jets.
      worst = std::max(worst, (j1 - d1).cwiseAbs().maxCoeff() / std::max(d1.cwiseAbs().maxCoeff(), 1e-12));
      worst = std::max(worst, (j2 - d2).cwiseAbs().maxCoeff() / std::max(d2.cwiseAbs().maxCoeff(), 1e-12));
    }
  }
  return make("input derivatives vs finite differences", worst, tolerance,
              "max relative error " + fmt(worst) + " over " + std::to_string(draws) + " networks (< " +
                  fmt(tolerance) + ")");
}

// ---------------------------------------------------------------------------

namespace {

using J = ad::Jet2<double>;

struct WaveCase {
  std::string label;
  Dim dim;
  std::vector<data::PlaneWaveSpec> waves;
};

std::vector<WaveCase> wave_cases() {
  using data::WaveKind;
  const auto soft = scenarios::soft_material();
  const auto steel = scenarios::steel();
  const auto w = [](WaveKind kind, double a, double k, int axis, int pol, int sense, double phase,
                    const MaterialParams& m) {
    data::PlaneWaveSpec s;
    s.kind = kind;
    s.amplitude = a;
    s.wavenumber = k;
    s.axis = axis;
    s.polarization = pol;
    s.sense = sense;
    s.phase = phase;
    s.material = m;
    return s;
  };
  const double k = 2.0 * std::numbers::pi;
  std::vector<WaveCase> cases;
  const auto p2x = w(WaveKind::P, 1e-3, k, 0, 0, 1, 0.0, soft);
  const auto p2y = w(WaveKind::P, 2e-3, 1.5 * k, 1, 1, -1, 0.4, soft);
  const auto s2x = w(WaveKind::S, 1e-3, k, 0, 1, 1, 0.3, soft);
  const auto s2y = w(WaveKind::S, 5e-4, 0.5 * k, 1, 0, 1, 1.1, soft);
  cases.push_back({"2D P", Dim::two, {p2x}});
  cases.push_back({"2D P along y", Dim::two, {p2y}});
  cases.push_back({"2D S", Dim::two, {s2x}});
  cases.push_back({"2D S along y", Dim::two, {s2y}});
  cases.push_back({"2D P+S", Dim::two, {p2x, p2y, s2x, s2y}});

  const auto p3x = w(WaveKind::P, 1e-4, k, 0, 0, 1, 0.0, steel);
  const auto p3z = w(WaveKind::P, 1e-4, k, 2, 2, -1, 0.2, steel);
  const auto s3xz = w(WaveKind::S, 1e-4, k, 0, 2, 1, 0.7, steel);
  const auto s3yx = w(WaveKind::S, 2e-4, 0.5 * k, 1, 0, -1, 0.1, steel);
  const auto s3zy = w(WaveKind::S, 1e-4, 1.5 * k, 2, 1, 1, 2.0, steel);
  cases.push_back({"3D P", Dim::three, {p3x}});
  cases.push_back({"3D P along z", Dim::three, {p3z}});
  cases.push_back({"3D S", Dim::three, {s3xz}});
  cases.push_back({"3D P+S", Dim::three, {p3x, p3z, s3xz, s3yx, s3zy}});
  return cases;
}

// Field values and derivatives in physical units at one point.
struct PointDerivs {
  std::array<double, 9> value;
  std::array<std::array<double, 9>, 3> d_space;  // d/dx, d/dy, d/dz
  std::array<double, 9> d2_time;
};

PointDerivs derivs_at(std::span<const data::PlaneWaveSpec> waves, const std::array<double, 4>& p) {
  PointDerivs out{};
  for (int dir = 0; dir < 4; ++dir) {
    std::array<J, 4> in;
    for (int i = 0; i < 4; ++i) in[i] = {p[i], i == dir ? 1.0 : 0.0, 0.0};
    const auto f = data::wave_fields<J>(waves, in[0], in[1], in[2], in[3]);
    for (int q = 0; q < 9; ++q) {
      if (dir == 0) out.value[q] = f[q].value;
      if (dir < 3) out.d_space[dir][q] = f[q].d1;
      if (dir == 3) out.d2_time[q] = f[q].d2;
    }
  }
  return out;
}

physics::ScaleSet scales_for(const std::vector<PointDerivs>& pts, const data::Geometry& g,
                             const MaterialParams& m) {
  physics::ScaleSet s;
  s.length = g.length_scale();
  s.time = g.t_hi;
  std::array<double, 9> mx{};
  for (const auto& p : pts) {
    for (int q = 0; q < 9; ++q) mx[q] = std::max(mx[q], std::abs(p.value[q]));
  }
  const double umax = std::max({mx[0], mx[1], mx[2]});
  const double smax = *std::max_element(mx.begin() + 3, mx.end());
  for (int q = 0; q < 9; ++q) {
    s.field(kFields3d[q]) = mx[q] > 0.0 ? mx[q] : (q < 3 ? umax : smax);
  }
  s.modulus = std::max(m.lambda, m.mu);
  s.density = m.rho;
  return s;
}

}  // namespace

CheckResult plane_wave_residuals(std::size_t points, std::uint64_t seed, double tolerance,
                                 const FaultInjection& fault) {
  double worst = 0.0;
  std::string worst_case;
  int case_index = 0;
  for (const auto& wc : wave_cases()) {
    data::Geometry g;
    g.dim = wc.dim;
    g.lo = {0.0, 0.0, 0.0};
    g.hi = {1.0, 0.5, 0.25};
    g.t_lo = 0.0;
    g.t_hi = wc.dim == Dim::two ? 1e-3 : 5e-6;
    std::vector<std::pair<double, double>> bounds{{g.lo[0], g.hi[0]}, {g.lo[1], g.hi[1]}};
    if (wc.dim == Dim::three) bounds.emplace_back(g.lo[2], g.hi[2]);
    bounds.emplace_back(g.t_lo, g.t_hi);
    const auto batch = sampling::lhs(points, bounds, derive_seed(seed, static_cast<std::uint64_t>(case_index++)));

    std::vector<PointDerivs> pd;
    pd.reserve(points);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      std::array<double, 4> p{batch.points(i, 0), batch.points(i, 1), 0.0, 0.0};
      if (wc.dim == Dim::three) {
        p[2] = batch.points(i, 2);
        p[3] = batch.points(i, 3);
      } else {
        p[3] = batch.points(i, 2);
      }
      pd.push_back(derivs_at(wc.waves, p));
    }
    const MaterialParams& mat = wc.waves.front().material;
    const physics::ScaleSet s = scales_for(pd, g, mat);
    physics::ScaleSet rs = s;
    rs.density *= fault.inertia_factor;
    const auto sm = physics::scale_material(mat, s);

    const auto sv = [&](const PointDerivs& p, Field f) { return p.value[static_cast<int>(f)] / s.field(f); };
    const auto sd = [&](const PointDerivs& p, Field f, int axis) {
      return p.d_space[axis][static_cast<int>(f)] * s.length / s.field(f);
    };
    const auto stt = [&](const PointDerivs& p, Field f) {
      return p.d2_time[static_cast<int>(f)] * s.time * s.time / s.field(f);
    };

    for (const auto& p : pd) {
      double r_max = 0.0;
      if (wc.dim == Dim::two) {
        physics::PointJets2d<double> j;
        j.sxx = sv(p, Field::sxx);
        j.syy = sv(p, Field::syy);
        j.sxy = sv(p, Field::sxy);
        j.dsxx_dx = sd(p, Field::sxx, 0);
        j.dsxy_dx = sd(p, Field::sxy, 0);
        j.dsxy_dy = sd(p, Field::sxy, 1);
        j.dsyy_dy = sd(p, Field::syy, 1);
        j.dux_dx = sd(p, Field::ux, 0);
        j.dux_dy = sd(p, Field::ux, 1);
        j.duy_dx = sd(p, Field::uy, 0);
        j.duy_dy = sd(p, Field::uy, 1);
        j.d2ux_dt2 = stt(p, Field::ux);
        j.d2uy_dt2 = stt(p, Field::uy);
        for (double r : physics::residual_2d<double>(j, sm, rs)) r_max = std::max(r_max, std::abs(r));
      } else {
        physics::PointJets3d<double> j;
        j.sxx = sv(p, Field::sxx);
        j.syy = sv(p, Field::syy);
        j.szz = sv(p, Field::szz);
        j.sxy = sv(p, Field::sxy);
        j.syz = sv(p, Field::syz);
        j.sxz = sv(p, Field::sxz);
        j.dsxx_dx = sd(p, Field::sxx, 0);
        j.dsxy_dx = sd(p, Field::sxy, 0);
        j.dsxy_dy = sd(p, Field::sxy, 1);
        j.dsxz_dx = sd(p, Field::sxz, 0);
        j.dsxz_dz = sd(p, Field::sxz, 2);
        j.dsyy_dy = sd(p, Field::syy, 1);
        j.dsyz_dy = sd(p, Field::syz, 1);
        j.dsyz_dz = sd(p, Field::syz, 2);
        j.dszz_dz = sd(p, Field::szz, 2);
        j.dux_dx = sd(p, Field::ux, 0);
        j.dux_dy = sd(p, Field::ux, 1);
        j.dux_dz = sd(p, Field::ux, 2);
        j.duy_dx = sd(p, Field::uy, 0);
        j.duy_dy = sd(p, Field::uy, 1);
        j.duy_dz = sd(p, Field::uy, 2);
        j.duz_dx = sd(p, Field::uz, 0);
        j.duz_dy = sd(p, Field::uz, 1);
        j.duz_dz = sd(p, Field::uz, 2);
        j.d2ux_dt2 = stt(p, Field::ux);
        j.d2uy_dt2 = stt(p, Field::uy);
        j.d2uz_dt2 = stt(p, Field::uz);
        for (double r : physics::residual_3d<double>(j, sm, rs)) r_max = std::max(r_max, std::abs(r));
      }
      if (!(r_max <= worst)) {
        worst = r_max;
        worst_case = wc.label;
      }
    }
  }
  return make("plane-wave residual", worst, tolerance,
              "max |r| " + fmt(worst) + " (" + worst_case + ") at " + std::to_string(points) +
                  " points per case (< " + fmt(tolerance) + ")");
}

CheckResult nrmse_oracle() {
  const std::array<double, 2> pred{1.0, 2.0};
  const std::array<double, 2> ref{0.0, 2.0};
  const double v = data::nrmse(pred, ref);
  const double exact = std::sqrt(0.5) / 2.0;  // 0.35355...
  const double err = std::abs(v - exact);
  return make("nrmse oracle", err, 1e-9,
              "nrmse([1,2],[0,2]) = " + std::to_string(v) + ", |error| " + fmt(err) + " (< 1e-9)");
}

CheckResult adam_first_step() {
  auto s = training::AdamState::fresh(1, 1e-3);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd g(1);
  g << 4.0;
  training::adam_step(s, theta, g);
  const double err = std::abs(theta[0] + 1e-3);
  return make("adam first step", err, 1e-6, "|dtheta + eta| = " + fmt(err) + " (< 1e-6)");
}

CheckResult lhs_occupancy() {
  const std::size_t n = 500;
  const auto b = sampling::lhs(n, {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, 2024);
  std::size_t bad = 0;
  for (Eigen::Index d = 0; d < 3; ++d) {
    std::vector<int> count(n, 0);
    for (Eigen::Index i = 0; i < b.size(); ++i) ++count[sampling::stratum(b.points(i, d), 0.0, 1.0, n)];
    bad += static_cast<std::size_t>(std::count_if(count.begin(), count.end(), [](int c) { return c != 1; }));
  }
  return make("lhs stratum occupancy", static_cast<double>(bad), 0.5,
              std::to_string(bad) + " strata without exactly one point (n=500, d=3)");
}

CheckResult lr_schedule_oracle() {
  const auto st = training::default_schedule();
  const std::array<int, 3> epochs{0, 2000, 4000};
  const std::array<double, 3> want{1e-3, 1e-4, 1e-5};
  double err = 0.0;
  std::string got;
  for (int i = 0; i < 3; ++i) {
    const double v = training::lr_schedule(epochs[i], st);
    err = std::max(err, std::abs(v - want[i]) / want[i]);
    got += (i ? ", " : "") + fmt(v);
  }
  return make("lr schedule", err, 1e-15, "epochs 0, 2000, 4000 -> " + got);
}

std::vector<CheckResult> quick(const FaultInjection& fault) {
  return {parameter_gradients(), input_derivatives(), plane_wave_residuals(1000, 3, 1e-10, fault),
          nrmse_oracle(),        adam_first_step(),   lhs_occupancy(),
          lr_schedule_oracle()};
}

// ---------------------------------------------------------------------------

ForwardOutcome run_forward(const scenarios::Scenario& sc) {
  ForwardOutcome out;
  out.result = training::train(sc.config, sc.train, sc.scales);
  const Eigen::MatrixXd pred = training::predict(out.result.pack, sc.eval.coords, sc.eval.schema, sc.scales);
  out.error = scenarios::displacement_nrmse(pred, sc.eval.fields, sc.eval.schema.dim);
  const auto means = training::epoch_means(out.result.history);
  const std::size_t w = std::min<std::size_t>(100, means.size());
  if (w > 0) {
    out.leading_mean = std::accumulate(means.begin(), means.begin() + static_cast<std::ptrdiff_t>(w), 0.0) /
                       static_cast<double>(w);
    out.trailing_mean = std::accumulate(means.end() - static_cast<std::ptrdiff_t>(w), means.end(), 0.0) /
                        static_cast<double>(w);
  }
  return out;
}

CheckResult forward_check(const ForwardOutcome& out, double tolerance) {
  const bool decreasing = out.trailing_mean < out.leading_mean;
  CheckResult r = make("forward desk run", out.error.worst, tolerance);
  r.passed = r.passed && decreasing;
  std::string per;
  for (std::size_t j = 0; j < out.error.per_field.size(); ++j) {
    per += (j ? ", " : "") + fmt(out.error.per_field[j]);
  }
  r.detail = "NRMSE(u) [" + per + "] (< " + fmt(tolerance) + "), loss mean trailing " +
             fmt(out.trailing_mean) + (decreasing ? " < " : " >= ") + "leading " + fmt(out.leading_mean);
  return r;
}

CheckResult inverse_check(const training::TrainResult& result, const MaterialParams& truth, double tolerance) {
  if (!result.recovered) return make("inverse desk run", INFINITY, tolerance, "no recovered parameters");
  const double el = std::abs(result.recovered->lambda - truth.lambda) / truth.lambda;
  const double em = std::abs(result.recovered->mu - truth.mu) / truth.mu;
  return make("inverse desk run", std::max(el, em), tolerance,
              "lambda " + std::to_string(result.recovered->lambda) + " (" + fmt(el) + "), mu " +
                  std::to_string(result.recovered->mu) + " (" + fmt(em) + "), relative errors < " +
                  fmt(tolerance));
}

std::vector<CheckResult> full(const FaultInjection& fault,
                              const std::function<void(const CheckResult&)>& progress) {
  std::vector<CheckResult> out;
  const auto add = [&](CheckResult r) {
    if (progress) progress(r);
    out.push_back(std::move(r));
  };
  for (auto& r : quick(fault)) add(std::move(r));
  add(forward_check(run_forward(scenarios::forward_2d())));
  const auto inv = scenarios::inverse_2d();
  add(inverse_check(training::train(inv.config, inv.train, inv.scales), inv.truth));
  return out;
}

}  // namespace elastodyn::verify

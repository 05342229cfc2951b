#include "elastodyn/data.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace elastodyn;
using data::WaveKind;

namespace {

const MaterialParams kSoft{1.0, 1.0, 1.0};

data::PlaneWaveSpec p_wave(double amp, double k, MaterialParams m = kSoft) {
  data::PlaneWaveSpec w;
  w.kind = WaveKind::P;
  w.amplitude = amp;
  w.wavenumber = k;
  w.material = m;
  return w;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("elastodyn_" + name);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string error_of(const std::filesystem::path& p, const data::Schema& s) {
  try {
    (void)data::load_csv(p, s);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

data::ReferenceDataset small_grid() {
  data::Geometry g;
  g.hi = {2.0, 1.0, 1.0};
  g.t_hi = 0.5;
  const std::vector<data::PlaneWaveSpec> waves{p_wave(0.01, 1.3)};
  return data::manufactured(waves, g, {5, 4, 1, 3});
}

}  // namespace

TEST_CASE("schema names and columns") {
  const auto s = data::Schema::parse("2d");
  CHECK(s.column_names() ==
        std::vector<std::string>{"x", "y", "t", "u_x", "u_y", "s_xx", "s_yy", "s_xy"});
  const auto s3 = data::Schema::parse("3d-surrogate");
  CHECK(s3.coord_count() == 5);
  CHECK(s3.field_count() == 9);
  CHECK(s3.mu_column() == 4);
  CHECK(data::Schema::parse("surrogate") == data::Schema{Dim::two, true});
  CHECK_THROWS_AS(data::Schema::parse("4d"), std::invalid_argument);
}

TEST_CASE("csv round trip") {
  const auto ds = small_grid();
  const auto p = temp_file("roundtrip.csv");
  data::write_csv(p, ds);
  const auto back = data::load_csv(p, ds.schema);
  std::filesystem::remove(p);
  REQUIRE(back.size() == ds.size());
  CHECK((back.coords - ds.coords).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.fields - ds.fields).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(back.boundary == ds.boundary);
  CHECK(back.geometry.hi[0] == 2.0);
}

TEST_CASE("csv columns may be reordered and extended") {
  const auto p = temp_file("reordered.csv");
  write_text(p, "note,t,s_xy,y,x,u_y,u_x,s_yy,s_xx\n9,0,7,0,0,5,4,6,8\n9,1,7,1,1,5,4,6,8\n");
  const auto ds = data::load_csv(p, data::Schema::parse("2d"));
  std::filesystem::remove(p);
  CHECK(ds.fields(0, 0) == 4.0);
  CHECK(ds.fields(0, 2) == 8.0);
  CHECK(ds.coords(1, 2) == 1.0);
  CHECK(ds.fields(0, 4) == 7.0);
}

TEST_CASE("csv errors name the column or line") {
  const auto s = data::Schema::parse("2d");
  const auto p = temp_file("bad.csv");

  write_text(p, "x,y,t,u_x,u_y,s_xx,s_yy\n0,0,0,0,0,0,0\n");
  CHECK(error_of(p, s).find("missing column 's_xy'") != std::string::npos);

  write_text(p, "x,y,t,u_x,u_y,s_xx,s_yy,s_xy\n0,0,0,0,0,0,0,0\n1,1,1,abc,0,0,0,0\n");
  const auto bad = error_of(p, s);
  CHECK(bad.find(":3:") != std::string::npos);
  CHECK(bad.find("u_x") != std::string::npos);

  write_text(p, "x,y,t,u_x,u_y,s_xx,s_yy,s_xy\n0,0,0,0,0,0,0\n");
  CHECK(error_of(p, s).find("expected 8 columns") != std::string::npos);

  write_text(p, "");
  CHECK(error_of(p, s).find("header") != std::string::npos);

  write_text(p, "x,y,t,u_x,u_y,s_xx,s_yy,s_xy\n");
  CHECK(error_of(p, s).find("no data rows") != std::string::npos);

  std::filesystem::remove(p);
  CHECK(error_of(p, s).find("cannot open") != std::string::npos);
}

TEST_CASE("boundary subsampling counts") {
  data::ReferenceDataset ds;
  ds.schema = data::Schema::parse("2d");
  ds.coords = Eigen::MatrixXd::Zero(2500, 3);
  ds.fields = Eigen::MatrixXd::Zero(2500, 5);
  ds.boundary.assign(2500, 0);
  for (std::size_t i = 0; i < 2100; ++i) ds.boundary[i] = 1;
  const auto sub = data::subsample_boundary(ds, 0.0676, 5);
  CHECK(sub.size() == 142);
  CHECK(sub.boundary_count() == 142);
  CHECK(data::subsample_boundary(ds, 1.0, 5).size() == 2100);
  CHECK(data::subsample_interior(ds, 1.0, 5).size() == 400);
  CHECK(data::subsample_boundary(ds, 0.0676, 5).coords == sub.coords);
  CHECK_THROWS_AS(data::subsample_boundary(ds, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(data::subsample_boundary(ds, 1.5, 5), std::invalid_argument);
}

TEST_CASE("subsampling keeps rows in order and varies with the seed") {
  const auto ds = small_grid();
  const auto a = data::subsample_boundary(ds, 0.5, 1);
  const auto b = data::subsample_boundary(ds, 0.5, 2);
  CHECK(a.coords != b.coords);
  for (Eigen::Index i = 1; i < a.size(); ++i) {
    const bool later = a.coords(i, 2) > a.coords(i - 1, 2) ||
                       (a.coords(i, 2) == a.coords(i - 1, 2) &&
                        (a.coords(i, 1) > a.coords(i - 1, 1) ||
                         (a.coords(i, 1) == a.coords(i - 1, 1) && a.coords(i, 0) > a.coords(i - 1, 0))));
    CHECK(later);
  }
}

TEST_CASE("boundary mask") {
  const auto ds = small_grid();
  // 5 x 4 grid: 14 of 20 nodes lie on a face, at each of 3 instants.
  CHECK(ds.boundary_count() == 42);
}

TEST_CASE("nrmse examples") {
  const std::vector<double> ref{0, 1, 2, 3};
  CHECK(data::nrmse(ref, ref) == 0.0);
  const std::vector<double> pred{1, 1, 2, 2};
  // RMSE = sqrt(2/4), range 3.
  CHECK(data::nrmse(pred, ref) == doctest::Approx(std::sqrt(0.5) / 3.0).epsilon(1e-14));
  const std::vector<double> flat{2, 2};
  CHECK_THROWS_AS(data::nrmse(flat, flat), std::invalid_argument);
  CHECK_THROWS_AS(data::nrmse(pred, flat), std::invalid_argument);
  CHECK_THROWS_AS(data::nrmse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("nrmse is invariant to common scaling and shifts") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ref(30), pred(30);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref[i] = n01(gen);
      pred[i] = ref[i] + 0.1 * n01(gen);
    }
    const double base = data::nrmse(pred, ref);
    CHECK(base >= 0.0);
    auto sp = pred, sr = ref;
    for (auto& v : sp) v *= 7.0;
    for (auto& v : sr) v *= 7.0;
    CHECK(data::nrmse(sp, sr) == doctest::Approx(base).epsilon(1e-12));
    for (auto& v : sp) v = v / 7.0 + 250.0;
    for (auto& v : sr) v = v / 7.0 + 250.0;
    CHECK(data::nrmse(sp, sr) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("manufactured wave values") {
  const MaterialParams m{2.0, 1.0, 4.0};
  auto w = p_wave(0.5, 2.0, m);
  CHECK(w.wave_speed() == doctest::Approx(1.0));
  w.kind = WaveKind::S;
  w.polarization = 1;
  CHECK(w.wave_speed() == doctest::Approx(0.5));

  // P wave at t = 0, x = 0: u = 0 and s_xx = A k (lambda + 2 mu).
  const std::vector<data::PlaneWaveSpec> waves{p_wave(0.5, 2.0, m)};
  const auto f = data::wave_fields<double>(waves, 0.0, 0.3, 0.0, 0.0);
  CHECK(f[0] == 0.0);
  CHECK(f[3] == doctest::Approx(0.5 * 2.0 * 4.0));
  CHECK(f[4] == doctest::Approx(0.5 * 2.0 * 2.0));
  CHECK(f[6] == 0.0);

  // Quarter period later the phase has moved by pi/2 at the origin.
  const double t = (std::numbers::pi / 2) / (2.0 * 1.0);
  const auto g = data::wave_fields<double>(waves, 0.0, 0.0, 0.0, t);
  CHECK(g[0] == doctest::Approx(-0.5));
}

TEST_CASE("manufactured validation") {
  auto w = p_wave(1.0, 1.0);
  w.polarization = 1;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = p_wave(1.0, 1.0);
  w.sense = 0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);

  data::Geometry g;
  auto out_of_plane = p_wave(1.0, 1.0);
  out_of_plane.axis = out_of_plane.polarization = 2;
  const std::vector<data::PlaneWaveSpec> waves{out_of_plane};
  CHECK_THROWS_AS(data::manufactured(waves, g, {2, 2, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(data::manufactured(std::vector<data::PlaneWaveSpec>{}, g, {2, 2, 1, 2}),
                  std::invalid_argument);
}

TEST_CASE("grid points ordering and surrogate column") {
  data::Geometry g;
  g.hi = {1.0, 2.0, 1.0};
  g.t_hi = 3.0;
  const auto pts = data::grid_points(g, {2, 3, 1, 2});
  REQUIRE(pts.rows() == 12);
  CHECK(pts(1, 0) == 1.0);
  CHECK(pts(2, 1) == 1.0);
  CHECK(pts(6, 2) == 3.0);
  const auto one = data::grid_points(g, {2, 2, 1, 1});
  CHECK(one.rows() == 4);
  CHECK((one.col(2).array() == 0.0).all());
  CHECK_THROWS_AS(data::grid_points(g, {2, 0, 1, 2}), std::invalid_argument);
  const std::vector<data::PlaneWaveSpec> waves{p_wave(0.1, 1.0)};
  const auto ds = data::manufactured(waves, g, {2, 3, 1, 2}, 0.075);
  CHECK(ds.schema.with_mu);
  CHECK((ds.coords.col(3).array() == 0.075).all());
  CHECK(ds.provenance == data::Provenance::manufactured);
}

TEST_CASE("concat and select") {
  const auto ds = small_grid();
  const auto both = data::concat(ds, ds);
  CHECK(both.size() == 2 * ds.size());
  const std::vector<std::size_t> rows{3, 0};
  const auto sel = ds.select(rows);
  CHECK(sel.coords.row(0) == ds.coords.row(3));
  CHECK(sel.boundary[1] == ds.boundary[0]);
  const std::vector<std::size_t> bad{1000};
  CHECK_THROWS_AS(ds.select(bad), std::out_of_range);
  CHECK_THROWS_AS(ds.field(Field::uz), std::invalid_argument);
}

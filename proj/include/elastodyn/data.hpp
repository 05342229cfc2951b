#pragma once

// Reference solutions: CSV import/export, manufactured plane waves,
// boundary subsampling and the NRMSE metric.
//
// CSV schema (comma separated, '.' decimal point, one header row):
//   2D:            x,y,t,u_x,u_y,s_xx,s_yy,s_xy
//   3D:            x,y,z,t,u_x,u_y,u_z,s_xx,s_yy,s_zz,s_xy,s_yz,s_xz
//   surrogate:     same with a `mu` column after `t`
// Columns may appear in any order; extra columns are ignored.

#include "elastodyn/autodiff/jet.hpp"
#include "elastodyn/fields.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace elastodyn::data {

struct Schema {
  Dim dim = Dim::two;
  bool with_mu = false;

  /// "2d", "3d", "2d-surrogate", "3d-surrogate" (also "surrogate" = 2D).
  static Schema parse(std::string_view name);
  std::string name() const;

  int spatial() const { return spatial_dims(dim); }
  int time_column() const { return spatial(); }
  int mu_column() const { return with_mu ? spatial() + 1 : -1; }
  int coord_count() const { return spatial() + 1 + (with_mu ? 1 : 0); }
  int field_count() const { return static_cast<int>(output_fields(dim).size()); }
  std::vector<std::string> coord_names() const;
  std::vector<std::string> column_names() const;

  friend bool operator==(const Schema&, const Schema&) = default;
};

/// Axis-aligned space-time box.
struct Geometry {
  Dim dim = Dim::two;
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  double t_lo = 0.0;
  double t_hi = 1.0;

  void validate() const;
  /// Largest absolute spatial extent.
  double length_scale() const;
};

enum class Provenance { imported, manufactured };

struct ReferenceDataset {
  Schema schema;
  Eigen::MatrixXd coords;     // N x coord_count: x, y, [z], t, [mu]
  Eigen::MatrixXd fields;     // N x field_count in output_fields() order
  Geometry geometry;
  std::vector<char> boundary;  // 1 when the point lies on a spatial face
  Provenance provenance = Provenance::imported;

  Eigen::Index size() const { return coords.rows(); }
  std::size_t boundary_count() const;
  /// Column of `f`; throws if the schema does not carry it.
  Eigen::VectorXd field(Field f) const;
  int field_index(Field f) const;
  ReferenceDataset select(std::span<const std::size_t> rows) const;
  /// Checks shapes, finiteness and that coordinates lie inside the geometry.
  void validate() const;
};

/// Marks points within 1e-9 * l_c of a spatial face.
std::vector<char> boundary_mask(const Eigen::MatrixXd& coords, const Geometry& geometry);

ReferenceDataset load_csv(const std::filesystem::path& path, const Schema& schema);
void write_csv(const std::filesystem::path& path, const ReferenceDataset& ds);

ReferenceDataset concat(const ReferenceDataset& a, const ReferenceDataset& b);

// ---------------------------------------------------------------------------
// Manufactured plane waves

enum class WaveKind { P, S };

/// Travelling plane wave u = A p sin(k n.x - sense k c t + phase) with unit
/// propagation axis n and polarisation p (p = n for P, p orthogonal to n
/// for S). Exact solution of the homogeneous equations without body force.
struct PlaneWaveSpec {
  WaveKind kind = WaveKind::P;
  double amplitude = 1.0;   // mm
  double wavenumber = 1.0;  // 1/mm
  int axis = 0;             // propagation axis 0/1/2
  int polarization = 0;     // displacement axis; must equal axis for P
  int sense = 1;            // +1 towards +axis, -1 towards -axis
  double phase = 0.0;
  MaterialParams material;

  /// sqrt((lambda + 2 mu)/rho) for P, sqrt(mu/rho) for S.
  double wave_speed() const;
  void validate() const;
};

/// Displacement and stress of a superposition of waves at (x, y, z, t) in
/// Field order (u_x, u_y, u_z, s_xx, s_yy, s_zz, s_xy, s_yz, s_xz). Generic
/// over the scalar so Jet2 inputs give exact derivatives.
template <class S>
std::array<S, 9> wave_fields(std::span<const PlaneWaveSpec> waves, const S& x, const S& y,
                             const S& z, const S& t) {
  using std::cos;
  using std::sin;
  std::array<S, 9> out;
  bool first = true;
  for (const auto& w : waves) {
    const double c = w.wave_speed();
    const double k = w.wavenumber;
    const std::array<const S*, 3> pos{&x, &y, &z};
    const S theta = k * *pos[w.axis] - (w.sense * k * c) * t + w.phase;
    const S sn = sin(theta);
    const S cs = cos(theta);
    // Strain = A k cos(theta) sym(p n); stress = lambda tr + 2 mu strain.
    std::array<double, 3> n{0, 0, 0};
    std::array<double, 3> p{0, 0, 0};
    n[w.axis] = 1.0;
    p[w.polarization] = 1.0;
    const double ak = w.amplitude * k;
    const double tr = p[0] * n[0] + p[1] * n[1] + p[2] * n[2];
    const auto sigma = [&](int i, int j) {
      const double eps = 0.5 * (p[i] * n[j] + p[j] * n[i]);
      return ak * (w.material.lambda * tr * (i == j ? 1.0 : 0.0) + 2.0 * w.material.mu * eps);
    };
    const std::array<S, 9> term{
        (w.amplitude * p[0]) * sn, (w.amplitude * p[1]) * sn, (w.amplitude * p[2]) * sn,
        sigma(0, 0) * cs,          sigma(1, 1) * cs,          sigma(2, 2) * cs,
        sigma(0, 1) * cs,          sigma(1, 2) * cs,          sigma(0, 2) * cs};
    if (first) {
      out = term;
      first = false;
    } else {
      for (std::size_t i = 0; i < 9; ++i) out[i] = out[i] + term[i];
    }
  }
  return out;
}

/// Regular space-time sampling: nx x ny [x nz] nodes at each time instant.
struct GridSpec {
  int nx = 2;
  int ny = 2;
  int nz = 1;
  int nt = 2;
};

/// Samples the superposition on the regular grid spanning `geometry`.
/// `mu_feature`, when set, adds a constant mu column (surrogate schema).
ReferenceDataset manufactured(std::span<const PlaneWaveSpec> waves, const Geometry& geometry,
                              const GridSpec& grid,
                              std::optional<double> mu_feature = std::nullopt);

/// Samples the superposition at arbitrary coordinate rows (x, y, [z], t).
ReferenceDataset manufactured_at(std::span<const PlaneWaveSpec> waves, const Geometry& geometry,
                                 const Eigen::MatrixXd& coords);

/// Regular grid of coordinate rows (x, y, [z], t) spanning the geometry,
/// ordered with x fastest and t slowest. An axis with a single node sits at
/// its lower bound.
Eigen::MatrixXd grid_points(const Geometry& geometry, const GridSpec& grid);

// ---------------------------------------------------------------------------

/// Uniform random subset of round(fraction * N_boundary) boundary points,
/// kept in original order. Deterministic per seed.
ReferenceDataset subsample_boundary(const ReferenceDataset& ds, double fraction,
                                    std::uint64_t seed);

/// Same for interior (non-boundary) points.
ReferenceDataset subsample_interior(const ReferenceDataset& ds, double fraction,
                                    std::uint64_t seed);

/// RMSE(pred - ref) / (max(ref) - min(ref)).
double nrmse(std::span<const double> pred, std::span<const double> ref);

}  // namespace elastodyn::data

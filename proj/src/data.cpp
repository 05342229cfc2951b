#include "elastodyn/data.hpp"

#include "elastodyn/random.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace elastodyn::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void csv_error(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Schema Schema::parse(std::string_view name) {
  if (name == "2d") return {Dim::two, false};
  if (name == "3d") return {Dim::three, false};
  if (name == "2d-surrogate" || name == "surrogate") return {Dim::two, true};
  if (name == "3d-surrogate") return {Dim::three, true};
  throw std::invalid_argument("unknown schema '" + std::string(name) +
                              "' (expected 2d, 3d, 2d-surrogate or 3d-surrogate)");
}

std::string Schema::name() const {
  std::string s = dim == Dim::two ? "2d" : "3d";
  if (with_mu) s += "-surrogate";
  return s;
}

std::vector<std::string> Schema::coord_names() const {
  std::vector<std::string> names{"x", "y"};
  if (dim == Dim::three) names.emplace_back("z");
  names.emplace_back("t");
  if (with_mu) names.emplace_back("mu");
  return names;
}

std::vector<std::string> Schema::column_names() const {
  auto names = coord_names();
  for (Field f : output_fields(dim)) names.emplace_back(field_name(f));
  return names;
}

void Geometry::validate() const {
  const int n = spatial_dims(dim);
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(hi[i] > lo[i])) {
      throw std::invalid_argument("geometry: empty or non-finite extent along axis " +
                                  std::to_string(i));
    }
  }
  if (!std::isfinite(t_lo) || !std::isfinite(t_hi) || !(t_hi > t_lo)) {
    throw std::invalid_argument("geometry: empty or non-finite time interval");
  }
}

double Geometry::length_scale() const {
  double m = 0.0;
  for (int i = 0; i < spatial_dims(dim); ++i) {
    m = std::max({m, std::abs(lo[i]), std::abs(hi[i])});
  }
  return m;
}

std::size_t ReferenceDataset::boundary_count() const {
  return static_cast<std::size_t>(std::count(boundary.begin(), boundary.end(), 1));
}

int ReferenceDataset::field_index(Field f) const {
  const auto fs = output_fields(schema.dim);
  const auto it = std::find(fs.begin(), fs.end(), f);
  if (it == fs.end()) {
    throw std::invalid_argument("field " + std::string(field_name(f)) + " is not part of schema " +
                                schema.name());
  }
  return static_cast<int>(it - fs.begin());
}

Eigen::VectorXd ReferenceDataset::field(Field f) const {
  return fields.col(field_index(f));
}

ReferenceDataset ReferenceDataset::select(std::span<const std::size_t> rows) const {
  ReferenceDataset out;
  out.schema = schema;
  out.geometry = geometry;
  out.provenance = provenance;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.coords.resize(n, coords.cols());
  out.fields.resize(n, fields.cols());
  out.boundary.resize(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    if (r >= size()) throw std::out_of_range("select: row " + std::to_string(r) + " out of range");
    out.coords.row(i) = coords.row(r);
    out.fields.row(i) = fields.row(r);
    out.boundary[static_cast<std::size_t>(i)] = boundary[static_cast<std::size_t>(r)];
  }
  return out;
}

void ReferenceDataset::validate() const {
  if (coords.cols() != schema.coord_count() || fields.cols() != schema.field_count()) {
    throw std::invalid_argument("dataset: column count does not match schema " + schema.name());
  }
  if (coords.rows() != fields.rows() || boundary.size() != static_cast<std::size_t>(coords.rows())) {
    throw std::invalid_argument("dataset: row counts differ between coordinates and fields");
  }
  if (!coords.allFinite() || !fields.allFinite()) {
    throw std::invalid_argument("dataset: non-finite value");
  }
  geometry.validate();
  const double tol = 1e-9 * std::max(geometry.length_scale(), 1.0);
  const double ttol = 1e-9 * std::max(std::abs(geometry.t_hi), 1.0);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    for (int a = 0; a < schema.spatial(); ++a) {
      const double v = coords(i, a);
      if (v < geometry.lo[a] - tol || v > geometry.hi[a] + tol) {
        throw std::invalid_argument("dataset: row " + std::to_string(i) + " lies outside the geometry");
      }
    }
    const double t = coords(i, schema.time_column());
    if (t < geometry.t_lo - ttol || t > geometry.t_hi + ttol) {
      throw std::invalid_argument("dataset: row " + std::to_string(i) + " lies outside the time interval");
    }
  }
}

std::vector<char> boundary_mask(const Eigen::MatrixXd& coords, const Geometry& geometry) {
  const int n = spatial_dims(geometry.dim);
  const double tol = 1e-9 * geometry.length_scale();
  std::vector<char> mask(static_cast<std::size_t>(coords.rows()), 0);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    for (int a = 0; a < n; ++a) {
      const double v = coords(i, a);
      if (std::abs(v - geometry.lo[a]) <= tol || std::abs(v - geometry.hi[a]) <= tol) {
        mask[static_cast<std::size_t>(i)] = 1;
        break;
      }
    }
  }
  return mask;
}

ReferenceDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) csv_error(path, 1, "missing header row");
  ++lineno;
  const auto header = split(line);
  const auto wanted = schema.column_names();
  std::vector<std::size_t> source(wanted.size());
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    const auto it = std::find(header.begin(), header.end(), wanted[k]);
    if (it == header.end()) csv_error(path, 1, "missing column '" + wanted[k] + "'");
    source[k] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      csv_error(path, lineno, "expected " + std::to_string(header.size()) + " columns, found " +
                                  std::to_string(cells.size()));
    }
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      const auto cell = cells[source[k]];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        csv_error(path, lineno, "bad value '" + std::string(cell) + "' in column '" + wanted[k] + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) csv_error(path, lineno, "no data rows");

  ReferenceDataset ds;
  ds.schema = schema;
  const auto nc = static_cast<Eigen::Index>(schema.coord_count());
  const auto nf = static_cast<Eigen::Index>(schema.field_count());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> all(
      values.data(), static_cast<Eigen::Index>(rows), nc + nf);
  ds.coords = all.leftCols(nc);
  ds.fields = all.rightCols(nf);

  ds.geometry.dim = schema.dim;
  for (int a = 0; a < schema.spatial(); ++a) {
    ds.geometry.lo[a] = ds.coords.col(a).minCoeff();
    ds.geometry.hi[a] = ds.coords.col(a).maxCoeff();
  }
  ds.geometry.t_lo = ds.coords.col(schema.time_column()).minCoeff();
  ds.geometry.t_hi = ds.coords.col(schema.time_column()).maxCoeff();
  ds.geometry.validate();
  ds.boundary = boundary_mask(ds.coords, ds.geometry);
  ds.provenance = Provenance::imported;
  return ds;
}

void write_csv(const std::filesystem::path& path, const ReferenceDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto names = ds.schema.column_names();
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  out << '\n';
  char buf[32];
  const auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.coords.cols(); ++j) {
      if (j) out << ',';
      put(ds.coords(i, j));
    }
    for (Eigen::Index j = 0; j < ds.fields.cols(); ++j) {
      out << ',';
      put(ds.fields(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ReferenceDataset concat(const ReferenceDataset& a, const ReferenceDataset& b) {
  if (!(a.schema == b.schema)) throw std::invalid_argument("concat: schemas differ");
  ReferenceDataset out;
  out.schema = a.schema;
  out.provenance = a.provenance;
  out.geometry = a.geometry;
  for (int i = 0; i < 3; ++i) {
    out.geometry.lo[i] = std::min(a.geometry.lo[i], b.geometry.lo[i]);
    out.geometry.hi[i] = std::max(a.geometry.hi[i], b.geometry.hi[i]);
  }
  out.geometry.t_lo = std::min(a.geometry.t_lo, b.geometry.t_lo);
  out.geometry.t_hi = std::max(a.geometry.t_hi, b.geometry.t_hi);
  out.coords.resize(a.size() + b.size(), a.coords.cols());
  out.coords << a.coords, b.coords;
  out.fields.resize(a.size() + b.size(), a.fields.cols());
  out.fields << a.fields, b.fields;
  out.boundary = boundary_mask(out.coords, out.geometry);
  return out;
}

// ---------------------------------------------------------------------------

double PlaneWaveSpec::wave_speed() const {
  const double modulus = kind == WaveKind::P ? material.lambda + 2.0 * material.mu : material.mu;
  return std::sqrt(modulus / material.rho);
}

void PlaneWaveSpec::validate() const {
  material.validate();
  if (axis < 0 || axis > 2 || polarization < 0 || polarization > 2) {
    throw std::invalid_argument("plane wave: axis and polarization must be 0, 1 or 2");
  }
  if (kind == WaveKind::P && polarization != axis) {
    throw std::invalid_argument("plane wave: a P wave is polarized along its axis");
  }
  if (kind == WaveKind::S && polarization == axis) {
    throw std::invalid_argument("plane wave: an S wave is polarized across its axis");
  }
  if (sense != 1 && sense != -1) throw std::invalid_argument("plane wave: sense must be +1 or -1");
  if (!std::isfinite(amplitude) || !std::isfinite(wavenumber) || !std::isfinite(phase)) {
    throw std::invalid_argument("plane wave: non-finite parameter");
  }
}

Eigen::MatrixXd grid_points(const Geometry& geometry, const GridSpec& grid) {
  geometry.validate();
  const bool three = geometry.dim == Dim::three;
  const int nz = three ? grid.nz : 1;
  if (grid.nx < 1 || grid.ny < 1 || grid.nt < 1 || nz < 1) {
    throw std::invalid_argument("grid: need at least 1 node along every axis");
  }
  const auto lin = [](double lo, double hi, int n, int i) {
    if (n == 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  const int cols = three ? 4 : 3;
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(grid.nx) * grid.ny * nz * grid.nt, cols);
  Eigen::Index r = 0;
  for (int it = 0; it < grid.nt; ++it) {
    for (int iz = 0; iz < nz; ++iz) {
      for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix, ++r) {
          pts(r, 0) = lin(geometry.lo[0], geometry.hi[0], grid.nx, ix);
          pts(r, 1) = lin(geometry.lo[1], geometry.hi[1], grid.ny, iy);
          if (three) pts(r, 2) = lin(geometry.lo[2], geometry.hi[2], nz, iz);
          pts(r, cols - 1) = lin(geometry.t_lo, geometry.t_hi, grid.nt, it);
        }
      }
    }
  }
  return pts;
}

ReferenceDataset manufactured_at(std::span<const PlaneWaveSpec> waves, const Geometry& geometry,
                                 const Eigen::MatrixXd& coords) {
  if (waves.empty()) throw std::invalid_argument("manufactured: no waves");
  for (const auto& w : waves) {
    w.validate();
    if (geometry.dim == Dim::two && (w.axis == 2 || w.polarization == 2)) {
      throw std::invalid_argument("manufactured: 2D waves must lie in the x-y plane");
    }
  }
  geometry.validate();
  const bool three = geometry.dim == Dim::three;
  const int spatial = spatial_dims(geometry.dim);
  if (coords.cols() < spatial + 1) throw std::invalid_argument("manufactured: too few coordinate columns");

  ReferenceDataset ds;
  ds.schema = {geometry.dim, false};
  ds.geometry = geometry;
  ds.provenance = Provenance::manufactured;
  ds.coords = coords.leftCols(spatial + 1);
  const auto fs = output_fields(geometry.dim);
  ds.fields.resize(coords.rows(), static_cast<Eigen::Index>(fs.size()));
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const double z = three ? coords(i, 2) : 0.0;
    const auto v = wave_fields<double>(waves, coords(i, 0), coords(i, 1), z, coords(i, spatial));
    for (std::size_t k = 0; k < fs.size(); ++k) {
      ds.fields(i, static_cast<Eigen::Index>(k)) = v[static_cast<std::size_t>(fs[k])];
    }
  }
  ds.boundary = boundary_mask(ds.coords, geometry);
  return ds;
}

ReferenceDataset manufactured(std::span<const PlaneWaveSpec> waves, const Geometry& geometry,
                              const GridSpec& grid, std::optional<double> mu_feature) {
  ReferenceDataset ds = manufactured_at(waves, geometry, grid_points(geometry, grid));
  if (mu_feature) {
    ds.schema.with_mu = true;
    Eigen::MatrixXd c(ds.size(), ds.coords.cols() + 1);
    c << ds.coords, Eigen::VectorXd::Constant(ds.size(), *mu_feature);
    ds.coords = std::move(c);
  }
  return ds;
}

// ---------------------------------------------------------------------------

namespace {

ReferenceDataset subsample(const ReferenceDataset& ds, double fraction, std::uint64_t seed,
                           char flag, const char* what) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument(std::string(what) + ": fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ds.boundary.size(); ++i) {
    if (ds.boundary[i] == flag) pool.push_back(i);
  }
  if (pool.empty()) {
    throw std::invalid_argument(std::string(what) + ": no " +
                                (flag ? "boundary" : "interior") + " points in dataset");
  }
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  Rng rng(seed);
  const auto perm = rng.permutation(pool.size());
  std::vector<std::size_t> rows;
  rows.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) rows.push_back(pool[perm[k]]);
  std::sort(rows.begin(), rows.end());
  return ds.select(rows);
}

}  // namespace

ReferenceDataset subsample_boundary(const ReferenceDataset& ds, double fraction,
                                    std::uint64_t seed) {
  return subsample(ds, fraction, seed, 1, "subsample_boundary");
}

ReferenceDataset subsample_interior(const ReferenceDataset& ds, double fraction,
                                    std::uint64_t seed) {
  return subsample(ds, fraction, seed, 0, "subsample_interior");
}

double nrmse(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) throw std::invalid_argument("nrmse: length mismatch");
  if (ref.empty()) throw std::invalid_argument("nrmse: empty input");
  const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("nrmse: reference has zero range");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = pred[i] - ref[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(ref.size())) / range;
}

}  // namespace elastodyn::data

#pragma once

// Scaled dynamic linear elasticity: characteristic scales, strong-form
// residuals for 2D plane strain and 3D, and the data/equation loss assembly.
//
// Every residual is the governing equation divided by a reference magnitude
// so that all terms are O(1) in scaled variables (x* = x/l_c, t* = t/t_c,
// u* = u/u_c, s* = s/s_c, lambda* = lambda/lambda_c, ...). Momentum balances
// are divided by s_xx_c/l_c; constitutive relations by u_y_c*lambda_c/l_c in
// 2D and u_z_c*lambda_c/l_c in 3D. lambda_c = mu_c throughout.
//
// The residual templates run on double (for analytic checks) and on tape
// Vars holding N x 1 columns (for training).

#include "elastodyn/autodiff/tape.hpp"
#include "elastodyn/fields.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elastodyn::data {
struct ReferenceDataset;
}

namespace elastodyn::physics {

struct ScaleSet {
  double length = 1.0;  // l_c = x_c = y_c = z_c
  double time = 1.0;
  double ux = 1.0, uy = 1.0, uz = 1.0;
  double sxx = 1.0, syy = 1.0, szz = 1.0, sxy = 1.0, syz = 1.0, sxz = 1.0;
  double modulus = 1.0;  // lambda_c = mu_c
  double density = 1.0;

  double field(Field f) const;
  double& field(Field f);
  /// All scales strictly positive and finite.
  void validate() const;
};

struct ScaleOverrides {
  std::optional<double> length;
  std::optional<double> time;
  std::optional<double> modulus;
  std::optional<double> density;
  std::map<Field, double> fields;
};

/// Each scale is the largest absolute value of its quantity in `reference`
/// unless overridden. The modulus scale defaults to max(lambda, mu) of the
/// material (including any per-sample mu column); density to rho.
/// Throws when a field has no data or its maximum is zero and no override
/// is given.
ScaleSet make_scales(const data::ReferenceDataset& reference, const ScaleOverrides& overrides = {},
                     const std::optional<MaterialParams>& material = std::nullopt);

template <class T>
struct ScaledMaterial {
  T lambda;
  T mu;
  T rho;
};

ScaledMaterial<double> scale_material(const MaterialParams& m, const ScaleSet& s);

/// Inputs to residual_2d at one point (or one column of points).
/// Values are scaled network outputs; derivatives are with respect to
/// scaled coordinates.
template <class T>
struct PointJets2d {
  T sxx, syy, sxy;
  std::optional<T> dsxx_dx, dsxy_dx, dsxy_dy, dsyy_dy;
  std::optional<T> dux_dx, dux_dy, duy_dx, duy_dy;
  std::optional<T> d2ux_dt2, d2uy_dt2;
};

template <class T>
struct PointJets3d {
  T sxx, syy, szz, sxy, syz, sxz;
  std::optional<T> dsxx_dx, dsxy_dx, dsxy_dy, dsxz_dx, dsxz_dz;
  std::optional<T> dsyy_dy, dsyz_dy, dsyz_dz, dszz_dz;
  std::optional<T> dux_dx, dux_dy, dux_dz;
  std::optional<T> duy_dx, duy_dy, duy_dz;
  std::optional<T> duz_dx, duz_dy, duz_dz;
  std::optional<T> d2ux_dt2, d2uy_dt2, d2uz_dt2;
};

namespace detail {
template <class T>
const T& need(const std::optional<T>& v, const char* what, const char* op) {
  if (!v) throw std::invalid_argument(std::string(op) + ": missing derivative " + what);
  return *v;
}
}  // namespace detail

/// Coefficient of rho* d2u*/dt*2 in the momentum residual for a
/// displacement component with scale `u_scale`.
inline double inertia_coefficient(const ScaleSet& s, double u_scale) {
  return u_scale * s.density * s.length / (s.sxx * s.time * s.time);
}

/// Momentum source in scaled form for a body force per unit volume f
/// (MPa/mm): exact solutions of  div(s) + f = rho u_tt  make the momentum
/// residual vanish when this is passed as `source`.
inline double scaled_momentum_source(double force_per_volume, const ScaleSet& s) {
  return -force_per_volume * s.length / s.sxx;
}

/// (r_x, r_y, r_xx, r_yy, r_xy). `source`, when given, is subtracted from
/// the momentum residuals.
template <class T>
std::array<T, 5> residual_2d(const PointJets2d<T>& j, const ScaledMaterial<T>& m,
                             const ScaleSet& s,
                             const std::optional<std::array<T, 2>>& source = std::nullopt) {
  using detail::need;
  constexpr const char* op = "residual_2d";
  const T& dsxx_dx = need(j.dsxx_dx, "dsxx/dx", op);
  const T& dsxy_dx = need(j.dsxy_dx, "dsxy/dx", op);
  const T& dsxy_dy = need(j.dsxy_dy, "dsxy/dy", op);
  const T& dsyy_dy = need(j.dsyy_dy, "dsyy/dy", op);
  const T& dux_dx = need(j.dux_dx, "dux/dx", op);
  const T& dux_dy = need(j.dux_dy, "dux/dy", op);
  const T& duy_dx = need(j.duy_dx, "duy/dx", op);
  const T& duy_dy = need(j.duy_dy, "duy/dy", op);
  const T& d2ux = need(j.d2ux_dt2, "d2ux/dt2", op);
  const T& d2uy = need(j.d2uy_dt2, "d2uy/dt2", op);

  const double c_xy = s.sxy / s.sxx;
  const double c_yy = s.syy / s.sxx;
  const double ratio = s.ux / s.uy;
  const double denom = s.uy * s.modulus;
  const T normal = m.lambda + 2.0 * m.mu;

  T r_x = dsxx_dx + c_xy * dsxy_dy - inertia_coefficient(s, s.ux) * (m.rho * d2ux);
  T r_y = c_xy * dsxy_dx + c_yy * dsyy_dy - inertia_coefficient(s, s.uy) * (m.rho * d2uy);
  if (source) {
    r_x = r_x - (*source)[0];
    r_y = r_y - (*source)[1];
  }
  T r_xx = (s.sxx * s.length / denom) * j.sxx - ratio * (normal * dux_dx) - m.lambda * duy_dy;
  T r_yy = (s.syy * s.length / denom) * j.syy - ratio * (m.lambda * dux_dx) - normal * duy_dy;
  T r_xy = (s.sxy * s.length / denom) * j.sxy - m.mu * (duy_dx + ratio * dux_dy);
  return {r_x, r_y, r_xx, r_yy, r_xy};
}

/// (r_x, r_y, r_z, r_xx, r_yy, r_zz, r_xy, r_yz, r_xz).
template <class T>
std::array<T, 9> residual_3d(const PointJets3d<T>& j, const ScaledMaterial<T>& m,
                             const ScaleSet& s,
                             const std::optional<std::array<T, 3>>& source = std::nullopt) {
  using detail::need;
  constexpr const char* op = "residual_3d";
  const T& dsxx_dx = need(j.dsxx_dx, "dsxx/dx", op);
  const T& dsxy_dx = need(j.dsxy_dx, "dsxy/dx", op);
  const T& dsxy_dy = need(j.dsxy_dy, "dsxy/dy", op);
  const T& dsxz_dx = need(j.dsxz_dx, "dsxz/dx", op);
  const T& dsxz_dz = need(j.dsxz_dz, "dsxz/dz", op);
  const T& dsyy_dy = need(j.dsyy_dy, "dsyy/dy", op);
  const T& dsyz_dy = need(j.dsyz_dy, "dsyz/dy", op);
  const T& dsyz_dz = need(j.dsyz_dz, "dsyz/dz", op);
  const T& dszz_dz = need(j.dszz_dz, "dszz/dz", op);
  const T& dux_dx = need(j.dux_dx, "dux/dx", op);
  const T& dux_dy = need(j.dux_dy, "dux/dy", op);
  const T& dux_dz = need(j.dux_dz, "dux/dz", op);
  const T& duy_dx = need(j.duy_dx, "duy/dx", op);
  const T& duy_dy = need(j.duy_dy, "duy/dy", op);
  const T& duy_dz = need(j.duy_dz, "duy/dz", op);
  const T& duz_dx = need(j.duz_dx, "duz/dx", op);
  const T& duz_dy = need(j.duz_dy, "duz/dy", op);
  const T& duz_dz = need(j.duz_dz, "duz/dz", op);
  const T& d2ux = need(j.d2ux_dt2, "d2ux/dt2", op);
  const T& d2uy = need(j.d2uy_dt2, "d2uy/dt2", op);
  const T& d2uz = need(j.d2uz_dt2, "d2uz/dt2", op);

  const double c_xy = s.sxy / s.sxx;
  const double c_xz = s.sxz / s.sxx;
  const double c_yy = s.syy / s.sxx;
  const double c_yz = s.syz / s.sxx;
  const double c_zz = s.szz / s.sxx;
  const double rx = s.ux / s.uz;
  const double ry = s.uy / s.uz;
  const double denom = s.uz * s.modulus;
  const T normal = m.lambda + 2.0 * m.mu;

  T r_x = dsxx_dx + c_xy * dsxy_dy + c_xz * dsxz_dz -
          inertia_coefficient(s, s.ux) * (m.rho * d2ux);
  T r_y = c_xy * dsxy_dx + c_yy * dsyy_dy + c_yz * dsyz_dz -
          inertia_coefficient(s, s.uy) * (m.rho * d2uy);
  T r_z = c_xz * dsxz_dx + c_yz * dsyz_dy + c_zz * dszz_dz -
          inertia_coefficient(s, s.uz) * (m.rho * d2uz);
  if (source) {
    r_x = r_x - (*source)[0];
    r_y = r_y - (*source)[1];
    r_z = r_z - (*source)[2];
  }
  T r_xx = (s.sxx * s.length / denom) * j.sxx - rx * (normal * dux_dx) -
           ry * (m.lambda * duy_dy) - m.lambda * duz_dz;
  T r_yy = (s.syy * s.length / denom) * j.syy - rx * (m.lambda * dux_dx) -
           ry * (normal * duy_dy) - m.lambda * duz_dz;
  T r_zz = (s.szz * s.length / denom) * j.szz - rx * (m.lambda * dux_dx) -
           ry * (m.lambda * duy_dy) - normal * duz_dz;
  T r_xy = (s.sxy * s.length / denom) * j.sxy - m.mu * (ry * duy_dx + rx * dux_dy);
  T r_yz = (s.syz * s.length / denom) * j.syz - m.mu * (ry * duy_dz + duz_dy);
  T r_xz = (s.sxz * s.length / denom) * j.sxz - m.mu * (rx * dux_dz + duz_dx);
  return {r_x, r_y, r_z, r_xx, r_yy, r_zz, r_xy, r_yz, r_xz};
}

// ---------------------------------------------------------------------------
// Losses

/// Per-column mean squared difference, (1/N) sum (pred - ref)^2.
std::vector<double> data_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref);
std::vector<ad::Var> data_loss(const ad::Var& pred, const ad::Var& ref);

/// Mean of squared residuals for each residual component.
template <std::size_t K>
std::vector<double> equation_loss(std::span<const std::array<double, K>> residuals) {
  std::vector<double> terms(K, 0.0);
  if (residuals.empty()) throw std::invalid_argument("equation_loss: no collocation points");
  for (const auto& r : residuals) {
    for (std::size_t k = 0; k < K; ++k) terms[k] += r[k] * r[k];
  }
  for (auto& t : terms) t /= static_cast<double>(residuals.size());
  return terms;
}

template <std::size_t K>
std::vector<ad::Var> equation_loss(const std::array<ad::Var, K>& residuals) {
  std::vector<ad::Var> terms;
  terms.reserve(K);
  for (const auto& r : residuals) terms.push_back(ad::mean(ad::square(r)));
  return terms;
}

struct LossWeights {
  std::vector<double> alpha;  // one per residual
  double data = 1.0;          // lambda_1
  double equation = 1.0;      // lambda_2

  /// alpha all one, lambda_1 = lambda_2 = 1.
  static LossWeights unit(Dim d);
  /// 2D surrogate weighting: alpha_1 = alpha_2 = 1e3 on the momentum terms.
  static LossWeights surrogate_2d();
};

struct LossBreakdown {
  std::vector<double> data_terms;
  std::vector<double> eqn_terms;
  std::vector<double> alpha;
  double lambda_data = 1.0;
  double lambda_eqn = 1.0;
  double data_total = 0.0;  // sum of data terms
  double eqn_total = 0.0;   // sum of alpha_i * eqn_i
  double total = 0.0;       // lambda_data * data_total + lambda_eqn * eqn_total
};

namespace detail {
void check_loss_shape(std::size_t n_data, std::size_t n_eqn, const LossWeights& w);
}

/// lambda_1 * sum(data) + lambda_2 * sum(alpha_i * eqn_i), accumulated left to
/// right. Shared by the double and tape paths so both agree bit for bit.
template <class T>
struct WeightedTotal {
  T data_total;
  T eqn_total;
  T total;
};

template <class T>
WeightedTotal<T> weighted_total(std::span<const T> data_terms, std::span<const T> eqn_terms,
                                const LossWeights& w) {
  detail::check_loss_shape(data_terms.size(), eqn_terms.size(), w);
  T data_total = data_terms[0];
  for (std::size_t i = 1; i < data_terms.size(); ++i) data_total = data_total + data_terms[i];
  T eqn_total = w.alpha[0] * eqn_terms[0];
  for (std::size_t i = 1; i < eqn_terms.size(); ++i) eqn_total = eqn_total + w.alpha[i] * eqn_terms[i];
  T total = w.data * data_total + w.equation * eqn_total;
  return {data_total, eqn_total, total};
}

LossBreakdown total_loss(std::span<const double> data_terms, std::span<const double> eqn_terms,
                         const LossWeights& weights);

}  // namespace elastodyn::physics

#include "elastodyn/physics.hpp"

#include "elastodyn/data.hpp"

#include <algorithm>
#include <cmath>

namespace elastodyn::physics {

double ScaleSet::field(Field f) const {
  return const_cast<ScaleSet*>(this)->field(f);
}

double& ScaleSet::field(Field f) {
  switch (f) {
    case Field::ux: return ux;
    case Field::uy: return uy;
    case Field::uz: return uz;
    case Field::sxx: return sxx;
    case Field::syy: return syy;
    case Field::szz: return szz;
    case Field::sxy: return sxy;
    case Field::syz: return syz;
    case Field::sxz: return sxz;
  }
  throw std::invalid_argument("unknown field");
}

void ScaleSet::validate() const {
  const auto check = [](double v, std::string_view name) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw std::invalid_argument("scale " + std::string(name) + " must be positive and finite, got " +
                                  std::to_string(v));
    }
  };
  check(length, "length");
  check(time, "time");
  check(modulus, "modulus");
  check(density, "density");
  for (Field f : kFields3d) check(field(f), field_name(f));
}

ScaleSet make_scales(const data::ReferenceDataset& ref, const ScaleOverrides& ov,
                     const std::optional<MaterialParams>& material) {
  ScaleSet s;
  const Eigen::Index n = ref.size();
  const int spatial = ref.schema.spatial();

  const auto from_data = [&](const Eigen::VectorXd& column, std::string_view name) {
    if (column.size() == 0) {
      throw std::invalid_argument("make_scales: no data for " + std::string(name) +
                                  "; provide an override");
    }
    const double m = column.cwiseAbs().maxCoeff();
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw std::invalid_argument("make_scales: " + std::string(name) +
                                  " is identically zero; provide an override for its scale");
    }
    return m;
  };

  if (ov.length) {
    s.length = *ov.length;
  } else {
    if (n == 0) throw std::invalid_argument("make_scales: empty dataset; provide a length override");
    s.length = from_data(ref.coords.leftCols(spatial).cwiseAbs().rowwise().maxCoeff(), "length");
  }
  if (ov.time) {
    s.time = *ov.time;
  } else {
    s.time = from_data(ref.coords.col(ref.schema.time_column()), "t");
  }

  for (Field f : kFields3d) {
    if (auto it = ov.fields.find(f); it != ov.fields.end()) {
      s.field(f) = it->second;
      continue;
    }
    const auto present = output_fields(ref.schema.dim);
    if (std::find(present.begin(), present.end(), f) == present.end()) {
      s.field(f) = 1.0;  // not part of a 2D problem
      continue;
    }
    s.field(f) = from_data(n > 0 ? ref.field(f) : Eigen::VectorXd(), field_name(f));
  }

  if (ov.modulus) {
    s.modulus = *ov.modulus;
  } else if (material) {
    double m = std::max(material->lambda, material->mu);
    if (ref.schema.with_mu && n > 0) {
      m = std::max(m, ref.coords.col(ref.schema.mu_column()).cwiseAbs().maxCoeff());
    }
    s.modulus = m;
  } else {
    throw std::invalid_argument("make_scales: modulus scale needs a material or an override");
  }

  if (ov.density) {
    s.density = *ov.density;
  } else if (material) {
    s.density = material->rho;
  } else {
    throw std::invalid_argument("make_scales: density scale needs a material or an override");
  }

  s.validate();
  return s;
}

ScaledMaterial<double> scale_material(const MaterialParams& m, const ScaleSet& s) {
  return {m.lambda / s.modulus, m.mu / s.modulus, m.rho / s.density};
}

std::vector<double> data_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != ref.cols()) {
    throw std::invalid_argument("data_loss: prediction and reference are not aligned");
  }
  if (pred.rows() == 0) throw std::invalid_argument("data_loss: empty batch");
  std::vector<double> terms(static_cast<std::size_t>(pred.cols()));
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    terms[static_cast<std::size_t>(j)] = (pred.col(j) - ref.col(j)).squaredNorm() /
                                         static_cast<double>(pred.rows());
  }
  return terms;
}

std::vector<ad::Var> data_loss(const ad::Var& pred, const ad::Var& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != ref.cols()) {
    throw std::invalid_argument("data_loss: prediction and reference are not aligned");
  }
  if (pred.rows() == 0) throw std::invalid_argument("data_loss: empty batch");
  const ad::Var diff = pred - ref;
  std::vector<ad::Var> terms;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    terms.push_back(ad::mean(ad::square(ad::column(diff, j))));
  }
  return terms;
}

LossWeights LossWeights::unit(Dim d) {
  LossWeights w;
  w.alpha.assign(output_fields(d).size(), 1.0);
  return w;
}

LossWeights LossWeights::surrogate_2d() {
  LossWeights w = unit(Dim::two);
  w.alpha[0] = 1e3;
  w.alpha[1] = 1e3;
  return w;
}

namespace detail {
void check_loss_shape(std::size_t n_data, std::size_t n_eqn, const LossWeights& w) {
  if (!((n_data == 5 && n_eqn == 5) || (n_data == 9 && n_eqn == 9))) {
    throw std::invalid_argument("total_loss: expected 5+5 (2D) or 9+9 (3D) terms, got " +
                                std::to_string(n_data) + "+" + std::to_string(n_eqn));
  }
  if (w.alpha.size() != n_eqn) {
    throw std::invalid_argument("total_loss: " + std::to_string(w.alpha.size()) +
                                " alpha weights for " + std::to_string(n_eqn) + " residuals");
  }
  const auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
  if (bad(w.data) || bad(w.equation) || std::any_of(w.alpha.begin(), w.alpha.end(), bad)) {
    throw std::invalid_argument("total_loss: weights must be non-negative and finite");
  }
}
}  // namespace detail

LossBreakdown total_loss(std::span<const double> data_terms, std::span<const double> eqn_terms,
                         const LossWeights& weights) {
  const auto t = weighted_total<double>(data_terms, eqn_terms, weights);
  LossBreakdown b;
  b.data_terms.assign(data_terms.begin(), data_terms.end());
  b.eqn_terms.assign(eqn_terms.begin(), eqn_terms.end());
  b.alpha = weights.alpha;
  b.lambda_data = weights.data;
  b.lambda_eqn = weights.equation;
  b.data_total = t.data_total;
  b.eqn_total = t.eqn_total;
  b.total = t.total;
  return b;
}

}  // namespace elastodyn::physics

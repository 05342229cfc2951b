#include "elastodyn/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace elastodyn {

std::string_view field_name(Field f) {
  switch (f) {
    case Field::ux: return "u_x";
    case Field::uy: return "u_y";
    case Field::uz: return "u_z";
    case Field::sxx: return "s_xx";
    case Field::syy: return "s_yy";
    case Field::szz: return "s_zz";
    case Field::sxy: return "s_xy";
    case Field::syz: return "s_yz";
    case Field::sxz: return "s_xz";
  }
  return "?";
}

std::span<const std::string_view> residual_names(Dim d) {
  static constexpr std::array<std::string_view, 5> names2d{"x", "y", "xx", "yy", "xy"};
  static constexpr std::array<std::string_view, 9> names3d{"x",  "y",  "z",  "xx", "yy",
                                                           "zz", "xy", "yz", "xz"};
  if (d == Dim::two) return names2d;
  return names3d;
}

void MaterialParams::validate() const {
  const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(lambda) || !ok(mu) || !ok(rho)) {
    throw std::invalid_argument("material parameters must be positive and finite (lambda=" +
                                std::to_string(lambda) + ", mu=" + std::to_string(mu) +
                                ", rho=" + std::to_string(rho) + ")");
  }
}

}  // namespace elastodyn

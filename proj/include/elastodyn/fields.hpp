#pragma once

// Field naming shared by the data, physics and network layers.
// Units are conventions only: mm, s, MPa, kg/mm^3.

#include <array>
#include <span>
#include <string>
#include <string_view>

namespace elastodyn {

enum class Dim { two = 2, three = 3 };

inline int spatial_dims(Dim d) { return static_cast<int>(d); }

enum class Field { ux, uy, uz, sxx, syy, szz, sxy, syz, sxz };

inline constexpr std::array<Field, 5> kFields2d{Field::ux, Field::uy, Field::sxx, Field::syy,
                                                Field::sxy};
inline constexpr std::array<Field, 9> kFields3d{Field::ux,  Field::uy,  Field::uz,
                                                Field::sxx, Field::syy, Field::szz,
                                                Field::sxy, Field::syz, Field::sxz};

/// Network output / dataset column order for a dimension.
inline std::span<const Field> output_fields(Dim d) {
  if (d == Dim::two) return kFields2d;
  return kFields3d;
}

/// CSV column name: u_x, u_y, u_z, s_xx, s_yy, s_zz, s_xy, s_yz, s_xz.
std::string_view field_name(Field f);

/// Residual names in output order: x, y, [z], xx, yy, [zz], xy, [yz, xz].
std::span<const std::string_view> residual_names(Dim d);

struct MaterialParams {
  double lambda = 0.0;  // MPa
  double mu = 0.0;      // MPa
  double rho = 0.0;     // kg/mm^3

  /// Throws std::invalid_argument unless lambda, mu, rho > 0 and finite.
  void validate() const;
};

}  // namespace elastodyn

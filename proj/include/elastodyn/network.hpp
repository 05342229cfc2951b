#pragma once

// Gated ("modified") multilayer perceptron.
//
//   u   = tanh(x Wu + bu)            v = tanh(x Wv + bv)
//   h_1 = tanh(x W_1 + b_1)
//   z_l = tanh(h_l W_{l+1} + b_{l+1}),   h_{l+1} = (1 - z_l) * u + z_l * v
//   out = h_L Wo + bo                    (linear head)
//
// for l = 1 .. L-1, where L = Dims::layers counts h_1 .. h_L. Rows of x are
// points; all affine maps act from the right.
//
// Output ordering is fixed:
//   2D: (u_x, u_y, s_xx, s_yy, s_xy)
//   3D: (u_x, u_y, u_z, s_xx, s_yy, s_zz, s_xy, s_yz, s_xz)

#include "elastodyn/autodiff/jet.hpp"
#include "elastodyn/autodiff/tape.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace elastodyn::network {

struct Dims {
  int inputs = 0;
  int hidden = 0;
  int layers = 0;
  int outputs = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Total trainable scalars:
///   hidden*(2*inputs + 2)          two encoders
/// + hidden*(inputs + 1)            first hidden map
/// + (layers-1)*hidden*(hidden + 1) gate maps
/// + outputs*(hidden + 1)           head
std::size_t parameter_count(const Dims& dims);

struct AffineMap {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::RowVectorXd bias;  // 1 x fan_out
};

struct ModifiedMlpParams {
  Dims dims;
  AffineMap encoder_u;
  AffineMap encoder_v;
  std::vector<AffineMap> hidden;  // hidden[0]: input -> hidden, rest hidden -> hidden
  AffineMap output;

  /// Flat view in the order encoder_u, encoder_v, hidden..., output; each
  /// weight then bias in column-major order.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  static ModifiedMlpParams zeros(const Dims& dims);
  static ModifiedMlpParams from_flat(const Dims& dims, const Eigen::VectorXd& flat);
};

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
ModifiedMlpParams init(const Dims& dims, std::uint64_t seed);

/// Single point.
Eigen::VectorXd forward(const ModifiedMlpParams& params, std::span<const double> x);

/// Row-wise evaluation of N points; rows are split over `threads` workers.
Eigen::MatrixXd forward_batch(const ModifiedMlpParams& params, const Eigen::MatrixXd& x,
                              int threads = 1);

// ---------------------------------------------------------------------------
// Tape path

struct AffineVars {
  ad::Var weight;
  ad::Var bias;
};

struct TapeParams {
  Dims dims;
  AffineVars encoder_u;
  AffineVars encoder_v;
  std::vector<AffineVars> hidden;
  AffineVars output;

  /// Leaves in flatten() order.
  std::vector<ad::Var> leaves() const;
};

/// Records every parameter block on `tape` as a differentiable leaf.
TapeParams bind(ad::Tape& tape, const ModifiedMlpParams& params);

/// N x outputs.
ad::Var forward(const TapeParams& params, const ad::Var& x);

struct JetDirection {
  int input = 0;
  bool second_order = false;
};

/// Forward pass that also propagates d/dx_k (and d2/dx_k2 when requested)
/// for each direction. Every stream is N x outputs.
ad::MultiJet<ad::Var> forward_jets(const TapeParams& params, const ad::Var& x,
                                   std::span<const JetDirection> directions);

/// Text block: "modified_mlp <inputs> <hidden> <layers> <outputs>", the
/// parameter count, then one value per line with 17 significant digits.
void write_params(std::ostream& os, const ModifiedMlpParams& params);
ModifiedMlpParams read_params(std::istream& is);

}  // namespace elastodyn::network

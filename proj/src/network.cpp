#include "elastodyn/network.hpp"

#include "elastodyn/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace elastodyn::network {

namespace {

void validate(const Dims& d) {
  if (d.inputs <= 0 || d.hidden <= 0 || d.layers <= 0 || d.outputs <= 0) {
    throw std::invalid_argument("network dims must be positive, got (" +
                                std::to_string(d.inputs) + ", " + std::to_string(d.hidden) +
                                ", " + std::to_string(d.layers) + ", " +
                                std::to_string(d.outputs) + ")");
  }
}

AffineMap zero_map(int fan_in, int fan_out) {
  return {Eigen::MatrixXd::Zero(fan_in, fan_out), Eigen::RowVectorXd::Zero(fan_out)};
}

template <class F>
void for_each_map(const ModifiedMlpParams& p, F&& f) {
  f(p.encoder_u);
  f(p.encoder_v);
  for (const auto& h : p.hidden) f(h);
  f(p.output);
}

template <class F>
void for_each_map(ModifiedMlpParams& p, F&& f) {
  f(p.encoder_u);
  f(p.encoder_v);
  for (auto& h : p.hidden) f(h);
  f(p.output);
}

Eigen::RowVectorXd tanh_affine(const Eigen::RowVectorXd& x, const AffineMap& m) {
  return (x * m.weight + m.bias).array().tanh().matrix();
}

Eigen::MatrixXd forward_rows(const ModifiedMlpParams& p, const Eigen::MatrixXd& x) {
  const auto layer = [](const Eigen::MatrixXd& in, const AffineMap& m) {
    Eigen::MatrixXd a = in * m.weight;
    a.rowwise() += m.bias;
    return a;
  };
  const Eigen::ArrayXXd u = layer(x, p.encoder_u).array().tanh();
  const Eigen::ArrayXXd v = layer(x, p.encoder_v).array().tanh();
  Eigen::MatrixXd h = layer(x, p.hidden[0]).array().tanh().matrix();
  for (std::size_t l = 1; l < p.hidden.size(); ++l) {
    const Eigen::ArrayXXd z = layer(h, p.hidden[l]).array().tanh();
    h = ((1.0 - z) * u + z * v).matrix();
  }
  return layer(h, p.output);
}

ad::Var affine(const ad::Var& x, const AffineVars& m) { return ad::matmul(x, m.weight) + m.bias; }

ad::MultiJet<ad::Var> affine(const ad::MultiJet<ad::Var>& x, const AffineVars& m) {
  auto r = ad::map_linear(x, [&](const ad::Var& t) { return ad::matmul(t, m.weight); });
  r.value = r.value + m.bias;
  return r;
}

}  // namespace

std::size_t parameter_count(const Dims& d) {
  validate(d);
  const auto in = static_cast<std::size_t>(d.inputs);
  const auto h = static_cast<std::size_t>(d.hidden);
  const auto l = static_cast<std::size_t>(d.layers);
  const auto out = static_cast<std::size_t>(d.outputs);
  return h * (2 * in + 2) + h * (in + 1) + (l - 1) * h * (h + 1) + out * (h + 1);
}

ModifiedMlpParams ModifiedMlpParams::zeros(const Dims& d) {
  validate(d);
  ModifiedMlpParams p;
  p.dims = d;
  p.encoder_u = zero_map(d.inputs, d.hidden);
  p.encoder_v = zero_map(d.inputs, d.hidden);
  p.hidden.push_back(zero_map(d.inputs, d.hidden));
  for (int l = 1; l < d.layers; ++l) p.hidden.push_back(zero_map(d.hidden, d.hidden));
  p.output = zero_map(d.hidden, d.outputs);
  return p;
}

Eigen::VectorXd ModifiedMlpParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count(dims)));
  Eigen::Index offset = 0;
  for_each_map(*this, [&](const AffineMap& m) {
    flat.segment(offset, m.weight.size()) =
        Eigen::Map<const Eigen::VectorXd>(m.weight.data(), m.weight.size());
    offset += m.weight.size();
    flat.segment(offset, m.bias.size()) = m.bias.transpose();
    offset += m.bias.size();
  });
  return flat;
}

void ModifiedMlpParams::assign(const Eigen::VectorXd& flat) {
  const auto expected = static_cast<Eigen::Index>(parameter_count(dims));
  if (flat.size() != expected) {
    throw std::invalid_argument("parameter vector has " + std::to_string(flat.size()) +
                                " entries, expected " + std::to_string(expected));
  }
  Eigen::Index offset = 0;
  for_each_map(*this, [&](AffineMap& m) {
    Eigen::Map<Eigen::VectorXd>(m.weight.data(), m.weight.size()) =
        flat.segment(offset, m.weight.size());
    offset += m.weight.size();
    m.bias = flat.segment(offset, m.bias.size()).transpose();
    offset += m.bias.size();
  });
}

ModifiedMlpParams ModifiedMlpParams::from_flat(const Dims& dims, const Eigen::VectorXd& flat) {
  ModifiedMlpParams p = zeros(dims);
  p.assign(flat);
  return p;
}

ModifiedMlpParams init(const Dims& dims, std::uint64_t seed) {
  ModifiedMlpParams p = ModifiedMlpParams::zeros(dims);
  Rng rng(seed);
  for_each_map(p, [&](AffineMap& m) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(m.weight.rows() + m.weight.cols()));
    // Column-major fill so the draw order matches flatten().
    for (Eigen::Index j = 0; j < m.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.weight.rows(); ++i) m.weight(i, j) = rng.uniform(-bound, bound);
    }
  });
  return p;
}

Eigen::VectorXd forward(const ModifiedMlpParams& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.dims.inputs) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.size()) +
                                " entries, network expects " + std::to_string(p.dims.inputs));
  }
  const Eigen::RowVectorXd in = Eigen::Map<const Eigen::RowVectorXd>(x.data(), p.dims.inputs);
  const Eigen::RowVectorXd u = tanh_affine(in, p.encoder_u);
  const Eigen::RowVectorXd v = tanh_affine(in, p.encoder_v);
  Eigen::RowVectorXd h = tanh_affine(in, p.hidden[0]);
  for (std::size_t l = 1; l < p.hidden.size(); ++l) {
    const Eigen::RowVectorXd z = tanh_affine(h, p.hidden[l]);
    h = ((1.0 - z.array()) * u.array() + z.array() * v.array()).matrix();
  }
  return (h * p.output.weight + p.output.bias).transpose();
}

Eigen::MatrixXd forward_batch(const ModifiedMlpParams& p, const Eigen::MatrixXd& x, int threads) {
  if (x.cols() != p.dims.inputs) {
    throw std::invalid_argument("forward_batch: input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(p.dims.inputs));
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index workers = std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(n, 1));
  if (workers <= 1) return forward_rows(p, x);

  Eigen::MatrixXd out(n, p.dims.outputs);
  const Eigen::Index chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (Eigen::Index w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index count = std::min(chunk, n - begin);
    if (count <= 0) break;
    pool.emplace_back([&, begin, count] {
      out.middleRows(begin, count) = forward_rows(p, x.middleRows(begin, count));
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

std::vector<ad::Var> TapeParams::leaves() const {
  std::vector<ad::Var> out;
  const auto push = [&](const AffineVars& m) {
    out.push_back(m.weight);
    out.push_back(m.bias);
  };
  push(encoder_u);
  push(encoder_v);
  for (const auto& h : hidden) push(h);
  push(output);
  return out;
}

TapeParams bind(ad::Tape& tape, const ModifiedMlpParams& p) {
  const auto bind_map = [&](const AffineMap& m) {
    return AffineVars{tape.variable(m.weight), tape.variable(Eigen::MatrixXd(m.bias))};
  };
  TapeParams t;
  t.dims = p.dims;
  t.encoder_u = bind_map(p.encoder_u);
  t.encoder_v = bind_map(p.encoder_v);
  for (const auto& h : p.hidden) t.hidden.push_back(bind_map(h));
  t.output = bind_map(p.output);
  return t;
}

ad::Var forward(const TapeParams& p, const ad::Var& x) {
  if (x.cols() != p.dims.inputs) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(p.dims.inputs));
  }
  const ad::Var u = ad::tanh(affine(x, p.encoder_u));
  const ad::Var v = ad::tanh(affine(x, p.encoder_v));
  const ad::Var gap = v - u;
  ad::Var h = ad::tanh(affine(x, p.hidden[0]));
  for (std::size_t l = 1; l < p.hidden.size(); ++l) {
    const ad::Var z = ad::tanh(affine(h, p.hidden[l]));
    h = u + z * gap;
  }
  return affine(h, p.output);
}

ad::MultiJet<ad::Var> forward_jets(const TapeParams& p, const ad::Var& x,
                                   std::span<const JetDirection> directions) {
  if (x.cols() != p.dims.inputs) {
    throw std::invalid_argument("forward_jets: input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(p.dims.inputs));
  }
  ad::Tape& tape = *x.tape();
  const Eigen::Index n = x.rows();

  ad::MultiJet<ad::Var> in{x, {}, {}};
  for (const auto& d : directions) {
    if (d.input < 0 || d.input >= p.dims.inputs) {
      throw std::out_of_range("forward_jets: direction " + std::to_string(d.input) +
                              " outside the network inputs");
    }
    Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(n, p.dims.inputs);
    seed.col(d.input).setOnes();
    in.d1.push_back(tape.constant(std::move(seed)));
    if (d.second_order) {
      in.d2.push_back(tape.constant(Eigen::MatrixXd::Zero(n, p.dims.inputs)));
    } else {
      in.d2.push_back(std::nullopt);
    }
  }

  const auto u = ad::tanh(affine(in, p.encoder_u));
  const auto v = ad::tanh(affine(in, p.encoder_v));
  const auto gap = v - u;
  auto h = ad::tanh(affine(in, p.hidden[0]));
  for (std::size_t l = 1; l < p.hidden.size(); ++l) {
    const auto z = ad::tanh(affine(h, p.hidden[l]));
    h = u + z * gap;
  }
  return affine(h, p.output);
}

void write_params(std::ostream& os, const ModifiedMlpParams& p) {
  const Eigen::VectorXd flat = p.flatten();
  os << "modified_mlp " << p.dims.inputs << ' ' << p.dims.hidden << ' ' << p.dims.layers << ' '
     << p.dims.outputs << '\n';
  os << flat.size() << '\n';
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < flat.size(); ++i) os << flat[i] << '\n';
}

ModifiedMlpParams read_params(std::istream& is) {
  std::string tag;
  Dims d;
  if (!(is >> tag >> d.inputs >> d.hidden >> d.layers >> d.outputs) || tag != "modified_mlp") {
    throw std::runtime_error("parameter block: expected 'modified_mlp <in> <hidden> <layers> <out>'");
  }
  validate(d);
  Eigen::Index count = 0;
  if (!(is >> count) || count != static_cast<Eigen::Index>(parameter_count(d))) {
    throw std::runtime_error("parameter block: count does not match dims");
  }
  Eigen::VectorXd flat(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!(is >> flat[i])) {
      throw std::runtime_error("parameter block: truncated after " + std::to_string(i) + " values");
    }
    if (!std::isfinite(flat[i])) {
      throw std::runtime_error("parameter block: non-finite value at index " + std::to_string(i));
    }
  }
  return ModifiedMlpParams::from_flat(d, flat);
}

}  // namespace elastodyn::network

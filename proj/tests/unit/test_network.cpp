#include "elastodyn/network.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace elastodyn;
using network::Dims;

namespace {

double glorot(const Eigen::MatrixXd& w) { return std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols())); }

// Written out with loops, independent of the Eigen expressions in forward().
std::vector<double> straight_line(const network::ModifiedMlpParams& p, const std::vector<double>& x) {
  const auto affine_tanh = [](const network::AffineMap& m, const std::vector<double>& in) {
    std::vector<double> out(static_cast<std::size_t>(m.weight.cols()));
    for (int j = 0; j < m.weight.cols(); ++j) {
      double acc = m.bias(j);
      for (int i = 0; i < m.weight.rows(); ++i) acc += in[static_cast<std::size_t>(i)] * m.weight(i, j);
      out[static_cast<std::size_t>(j)] = std::tanh(acc);
    }
    return out;
  };
  const auto u = affine_tanh(p.encoder_u, x);
  const auto v = affine_tanh(p.encoder_v, x);
  auto h = affine_tanh(p.hidden[0], x);
  for (std::size_t l = 1; l < p.hidden.size(); ++l) {
    const auto z = affine_tanh(p.hidden[l], h);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = (1.0 - z[i]) * u[i] + z[i] * v[i];
  }
  std::vector<double> y(static_cast<std::size_t>(p.output.weight.cols()));
  for (int j = 0; j < p.output.weight.cols(); ++j) {
    double acc = p.output.bias(j);
    for (int i = 0; i < p.output.weight.rows(); ++i) acc += h[static_cast<std::size_t>(i)] * p.output.weight(i, j);
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

}  // namespace

TEST_CASE("parameter count") {
  const Dims d{3, 64, 4, 5};
  const std::size_t expected = 64 * (2 * 3 + 2) + 64 * (3 + 1) + 3 * 64 * 65 + 5 * 65;
  CHECK(network::parameter_count(d) == expected);
  CHECK(static_cast<std::size_t>(network::init(d, 1).flatten().size()) == expected);
}

TEST_CASE("init is deterministic with zero biases and bounded weights") {
  const Dims small{3, 4, 2, 5};
  CHECK((network::init(small, 7).flatten().array() == network::init(small, 7).flatten().array()).all());
  CHECK((network::init(small, 7).flatten().array() != network::init(small, 8).flatten().array()).any());

  const auto p = network::init({3, 64, 4, 5}, 11);
  std::vector<const network::AffineMap*> maps{&p.encoder_u, &p.encoder_v, &p.output};
  for (const auto& h : p.hidden) maps.push_back(&h);
  for (const auto* m : maps) {
    CHECK(m->bias.isZero(0.0));
    CHECK(m->weight.cwiseAbs().maxCoeff() <= glorot(m->weight));
    CHECK(m->weight.cwiseAbs().maxCoeff() > 0.5 * glorot(m->weight));
  }
  CHECK_THROWS_AS(network::init({0, 4, 2, 5}, 1), std::invalid_argument);
  CHECK_THROWS_AS(network::init({3, 4, -1, 5}, 1), std::invalid_argument);
}

TEST_CASE("zero parameters give zero output") {
  const auto p = network::ModifiedMlpParams::zeros({3, 16, 3, 5});
  const std::array<double, 3> x{0.1, 0.2, 0.3};
  CHECK(network::forward(p, x).isZero(0.0));
}

TEST_CASE("identical encoders make the gates irrelevant") {
  auto p = network::init({3, 12, 4, 5}, 3);
  p.encoder_v = p.encoder_u;
  const std::array<double, 3> x{0.4, -0.7, 0.9};
  const Eigen::VectorXd y = network::forward(p, x);
  Eigen::RowVectorXd u(12);
  for (int j = 0; j < 12; ++j) {
    double acc = p.encoder_u.bias(j);
    for (int i = 0; i < 3; ++i) acc += x[static_cast<std::size_t>(i)] * p.encoder_u.weight(i, j);
    u(j) = std::tanh(acc);
  }
  const Eigen::RowVectorXd expected = u * p.output.weight + p.output.bias;
  for (int j = 0; j < 5; ++j) CHECK(y(j) == doctest::Approx(expected(j)).epsilon(1e-14));
}

TEST_CASE("forward matches a straight-line evaluation") {
  const auto p = network::init({3, 10, 3, 5}, 2024);
  const std::vector<double> x{0.1, 0.2, 0.3};
  const Eigen::VectorXd y = network::forward(p, x);
  const auto ref = straight_line(p, x);
  for (int j = 0; j < 5; ++j) CHECK(y(j) == doctest::Approx(ref[static_cast<std::size_t>(j)]).epsilon(1e-13));

  Eigen::MatrixXd batch(3, 3);
  batch << 0.1, 0.2, 0.3, -0.5, 0.0, 0.7, 1.0, 1.0, -1.0;
  const Eigen::MatrixXd yb = network::forward_batch(p, batch, 2);
  for (int i = 0; i < 3; ++i) {
    const auto r = straight_line(p, {batch(i, 0), batch(i, 1), batch(i, 2)});
    for (int j = 0; j < 5; ++j) CHECK(yb(i, j) == doctest::Approx(r[static_cast<std::size_t>(j)]).epsilon(1e-13));
  }
}

TEST_CASE("tape forward agrees with plain forward") {
  const auto p = network::init({4, 9, 3, 5}, 5);
  Eigen::MatrixXd x(4, 4);
  x.setRandom();
  ad::Tape tape;
  const auto tp = network::bind(tape, p);
  const Eigen::MatrixXd a = network::forward(tp, tape.constant(x)).value();
  const Eigen::MatrixXd b = network::forward_batch(p, x);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("output is affine in the head") {
  auto p = network::init({3, 8, 2, 5}, 9);
  const std::array<double, 3> x{0.3, 0.1, -0.2};
  const Eigen::VectorXd y = network::forward(p, x);
  p.output.weight *= 3.0;
  p.output.bias *= 3.0;
  const Eigen::VectorXd y3 = network::forward(p, x);
  for (int j = 0; j < 5; ++j) CHECK(y3(j) == doctest::Approx(3.0 * y(j)).epsilon(1e-14));
}

TEST_CASE("dimension mismatch is rejected") {
  const auto p = network::init({3, 8, 2, 5}, 9);
  const std::array<double, 2> x{0.3, 0.1};
  CHECK_THROWS_AS(network::forward(p, x), std::invalid_argument);
  CHECK_THROWS(network::ModifiedMlpParams::from_flat({3, 8, 2, 5}, Eigen::VectorXd::Zero(4)));
}

TEST_CASE("parameter text round trip is exact") {
  const auto p = network::init({5, 7, 3, 9}, 77);
  std::stringstream ss;
  network::write_params(ss, p);
  const auto q = network::read_params(ss);
  CHECK(q.dims == p.dims);
  CHECK((q.flatten().array() == p.flatten().array()).all());

  std::stringstream bad("modified_mlp 3 4 2 5\n3\n1\n2\n");
  CHECK_THROWS(network::read_params(bad));
}

#include "elastodyn/sampling.hpp"
#include "elastodyn/scenarios.hpp"
#include "elastodyn/training.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace elastodyn;
using training::Mapping;
using training::Mode;

namespace {

// Small forward problem that trains in well under a second per epoch.
scenarios::Scenario tiny_forward(int epochs, std::uint64_t seed = 3) {
  auto sc = scenarios::forward_2d(seed);
  sc.config.stages = {{epochs, 1e-3}};
  sc.config.hidden = 8;
  sc.config.layers = 2;
  sc.config.n_collocation = 16;
  sc.config.batch_size = 16;
  return sc;
}

std::string history_csv(const training::TrainResult& r, const training::TrainConfig& c) {
  std::ostringstream os;
  training::write_history_csv(os, r.history, c.dim, c.mode);
  return os.str();
}

}  // namespace

TEST_CASE("adam first step and zero gradient") {
  auto st = training::AdamState::fresh(1, 1e-3);
  Eigen::VectorXd theta(1), g(1);
  theta << 0.0;
  g << 4.0;
  training::adam_step(st, theta, g);
  CHECK(std::abs(theta[0] + 1e-3) < 1e-6);
  CHECK(st.step_count == 1);

  auto z = training::AdamState::fresh(3, 1e-3);
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(3, -1, 1);
  const Eigen::VectorXd before = p;
  training::adam_step(z, p, Eigen::VectorXd::Zero(3));
  CHECK((p.array() == before.array()).all());
}

TEST_CASE("adam minimises a scalar quadratic") {
  auto st = training::AdamState::fresh(1, 0.1);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd g(1);
    g << 2.0 * (theta[0] - 3.0);
    training::adam_step(st, theta, g);
  }
  CHECK(std::abs(theta[0] - 3.0) < 0.1);
}

TEST_CASE("adam rejects non-finite gradients") {
  auto st = training::AdamState::fresh(2);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2);
  g << 1.0, std::nan("");
  try {
    training::adam_step(st, theta, g);
    FAIL("expected NonFiniteGradientError");
  } catch (const training::NonFiniteGradientError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("learning-rate schedule") {
  const auto stages = training::default_schedule();
  CHECK(training::lr_schedule(0, stages) == 1e-3);
  CHECK(training::lr_schedule(1999, stages) == 1e-3);
  CHECK(training::lr_schedule(2000, stages) == 1e-4);
  CHECK(training::lr_schedule(4000, stages) == 1e-5);
  CHECK(training::total_epochs(stages) == 6000);
  CHECK_THROWS_AS(training::lr_schedule(6000, stages), std::out_of_range);
}

TEST_CASE("output transform") {
  Eigen::MatrixXd raw(2, 5);
  raw << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  Eigen::VectorXd x(2);
  x << 0.0, 1.0;
  const auto t = training::apply_output_transform(raw, x, Dim::two, true);
  CHECK(t(0, 0) == 0.0);
  CHECK(t(0, 1) == 0.0);
  CHECK(t.row(0).tail(3) == raw.row(0).tail(3));
  CHECK(t.row(1) == raw.row(1));
  CHECK(training::apply_output_transform(raw, x, Dim::two, false) == raw);
}

TEST_CASE("material mappings") {
  const auto m = training::map_material(0.0, 0.0, Mapping::sigmoid, 150000.0);
  CHECK(m.lambda_star == 0.5);
  CHECK(m.lambda == 75000.0);
  CHECK(training::map_material(0.3, 0.1, Mapping::linear, 1.0).lambda_star == doctest::Approx(0.3));
  for (double n : {-40.0, -3.0, 0.0, 2.5, 30.0}) {
    const auto s = training::map_material(n, -n, Mapping::sigmoid, 1.0);
    CHECK(s.lambda_star > 0.0);
    CHECK(s.lambda_star < 1.0);
    CHECK(s.lambda + 2 * s.mu > 0.0);
  }
  CHECK(training::map_material(0.5, 0.0, Mapping::tanh, 2.0).lambda == doctest::Approx(2 * std::tanh(0.5)));
}

TEST_CASE("unsupported inverse presets warn") {
  CHECK_FALSE(training::preset_warning(Mode::inverse, Mapping::sigmoid, true));
  CHECK_FALSE(training::preset_warning(Mode::forward, Mapping::linear, false));
  for (auto f : {Mapping::linear, Mapping::tanh}) {
    for (bool hard : {true, false}) {
      const auto w = training::preset_warning(Mode::inverse, f, hard);
      REQUIRE(w);
      CHECK(w->find("unsupported inverse preset") != std::string::npos);
    }
  }
  CHECK(training::preset_warning(Mode::inverse, Mapping::sigmoid, false));

  auto sc = scenarios::inverse_2d(Mapping::linear, true);
  sc.config.stages = {{0, 1e-3}};
  std::vector<std::string> seen;
  training::TrainHooks hooks;
  hooks.on_warning = [&](const std::string& w) { seen.push_back(w); };
  const auto r = training::train(sc.config, sc.train, sc.scales, hooks);
  REQUIRE(seen.size() == 1);
  CHECK(r.warnings == seen);
}

TEST_CASE("inverse trainables receive gradient at initialisation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto sc = scenarios::inverse_2d(Mapping::sigmoid, true, 100 + seed);
    sc.config.hidden = 16;
    sc.config.layers = 2;
    const auto pack = training::initial_pack(sc.config);
    const Eigen::MatrixXd x = training::scaled_inputs(sc.train.coords, sc.train.schema, sc.scales);
    const Eigen::MatrixXd y = training::scaled_fields(sc.train.fields, Dim::two, sc.scales);
    const auto colloc = sampling::lhs(64, training::collocation_bounds(sc.config, sc.train, sc.scales), seed);
    ad::Tape tape;
    const auto ev = training::evaluate_step(sc.config, pack, sc.scales, x, y, colloc.points, tape);
    const Eigen::Index n = ev.gradient.size();
    CHECK(ev.gradient[n - 2] != 0.0);
    CHECK(ev.gradient[n - 1] != 0.0);
  }
}

TEST_CASE("zero epochs returns the initial pack") {
  auto sc = tiny_forward(0);
  const auto r = training::train(sc.config, sc.train, sc.scales);
  CHECK(r.history.empty());
  CHECK((r.pack.flatten().array() == training::initial_pack(sc.config).flatten().array()).all());
}

TEST_CASE("training is deterministic and records every step") {
  auto sc = tiny_forward(3);
  const auto a = training::train(sc.config, sc.train, sc.scales);
  const auto b = training::train(sc.config, sc.train, sc.scales);
  const std::size_t batches = (static_cast<std::size_t>(sc.train.size()) + 15) / 16;
  CHECK(a.history.size() == 3 * batches);
  CHECK(history_csv(a, sc.config) == history_csv(b, sc.config));
  CHECK((a.pack.flatten().array() == b.pack.flatten().array()).all());
  for (const auto& row : a.history) {
    const auto& l = row.loss;
    CHECK(l.total == l.lambda_data * l.data_total + l.lambda_eqn * l.eqn_total);
    for (double t : l.data_terms) CHECK(t >= 0.0);
    for (double t : l.eqn_terms) CHECK(t >= 0.0);
  }
  auto other = sc;
  other.config.seed += 1;
  CHECK(history_csv(training::train(other.config, other.train, other.scales), other.config) != history_csv(a, sc.config));
}

TEST_CASE("divergence keeps the last finite parameters") {
  auto sc = tiny_forward(5);
  sc.config.stages = {{5, 1e200}};
  try {
    (void)training::train(sc.config, sc.train, sc.scales);
    FAIL("expected DivergenceError");
  } catch (const training::DivergenceError& e) {
    CHECK(e.last_good().flatten().allFinite());
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  auto sc = tiny_forward(1);
  auto c = sc.config;
  c.stages = {{10, 1e-4}, {10, 1e-3}};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = sc.config;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = sc.config;
  c.batch_size = static_cast<std::size_t>(sc.train.size()) + 1;
  CHECK_THROWS_AS(training::train(c, sc.train, sc.scales), std::invalid_argument);
}

TEST_CASE("scaled inputs and field round trip") {
  const auto sc = tiny_forward(1);
  const Eigen::MatrixXd f = training::scaled_fields(sc.train.fields, Dim::two, sc.scales);
  const Eigen::MatrixXd back = training::unscaled_fields(f, Dim::two, sc.scales);
  CHECK((back - sc.train.fields).cwiseAbs().maxCoeff() <= 1e-15 * sc.train.fields.cwiseAbs().maxCoeff());
  const Eigen::MatrixXd x = training::scaled_inputs(sc.train.coords, sc.train.schema, sc.scales);
  CHECK(x.col(2).maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("checkpoint round trip") {
  auto sc = scenarios::inverse_2d();
  sc.config.hidden = 6;
  sc.config.layers = 2;
  training::Checkpoint cp;
  cp.mode = Mode::inverse;
  cp.schema = sc.train.schema;
  cp.geometry = sc.train.geometry;
  cp.scales = sc.scales;
  cp.material = sc.config.material;
  cp.pack = training::initial_pack(sc.config);
  cp.pack.extra = std::array<double, 2>{0.25, -1.5};
  cp.epoch = 12;
  const auto path = std::filesystem::temp_directory_path() / "elastodyn_cp_test.txt";
  training::write_checkpoint(path, cp);
  const auto back = training::read_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.mode == Mode::inverse);
  CHECK(back.epoch == 12);
  CHECK(back.schema == cp.schema);
  CHECK(back.scales.modulus == cp.scales.modulus);
  CHECK(back.geometry.t_hi == cp.geometry.t_hi);
  CHECK(back.pack.hard_bc == cp.pack.hard_bc);
  CHECK((back.pack.flatten().array() == cp.pack.flatten().array()).all());
}

TEST_CASE("history csv layout") {
  auto sc = scenarios::inverse_2d();
  sc.config.stages = {{1, 1e-3}};
  sc.config.hidden = 6;
  sc.config.layers = 2;
  sc.config.n_collocation = 8;
  const auto r = training::train(sc.config, sc.train, sc.scales);
  const auto csv = history_csv(r, sc.config);
  const auto header = csv.substr(0, csv.find('\n'));
  CHECK(header.rfind("epoch,step,lr,loss_total,loss_data,loss_eqn,data_u_x", 0) == 0);
  CHECK(header.find("eqn_xy") != std::string::npos);
  CHECK(header.size() >= 10);
  CHECK(header.substr(header.size() - 10) == ",lambda,mu");
  REQUIRE(r.recovered);
  CHECK(r.recovered->rho == sc.truth.rho);
}

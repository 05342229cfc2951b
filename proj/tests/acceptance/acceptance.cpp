// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include "elastodyn/scenarios.hpp"
#include "elastodyn/training.hpp"
#include "elastodyn/verify.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace elastodyn;

namespace {

// Tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kResidualTol = 1e-10;
constexpr double kForwardTol = 5e-2;
constexpr double kInverseTol = 0.05;
constexpr double kSurrogateTol = 1e-1;
constexpr double kGradBudget = 120.0;
constexpr double kResidualBudget = 30.0;
constexpr double kForwardBudget = 1800.0;
constexpr double kInverseBudget = 1800.0;
constexpr double kSurrogateBudget = 2700.0;
constexpr double kOracleBudget = 5.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
  if (!passed) ++failures;
  std::cout << "criterion " << id << " " << (passed ? "PASS" : "FAIL") << " " << name << ": " << detail
            << std::endl;
}

std::string timing(double s, double budget) {
  std::ostringstream os;
  os.precision(3);
  os << s << " s (budget " << budget << " s)";
  return os.str();
}

std::string history_of(const training::TrainResult& r, const training::TrainConfig& c) {
  std::ostringstream os;
  training::write_history_csv(os, r.history, c.dim, c.mode);
  return os.str();
}

void gradients() {
  const auto t0 = Clock::now();
  const auto p = verify::parameter_gradients(20, 1, kGradTol);
  const auto d = verify::input_derivatives(20, 2, kGradTol);
  const double s = seconds_since(t0);
  report(1, "gradient correctness", p.passed && d.passed && s < kGradBudget,
         p.detail + "; " + d.detail + "; " + timing(s, kGradBudget));
}

void residuals() {
  const auto t0 = Clock::now();
  const auto r = verify::plane_wave_residuals(1000, 3, kResidualTol);
  const double s = seconds_since(t0);
  report(2, "residual annihilation", r.passed && s < kResidualBudget,
         r.detail + "; " + timing(s, kResidualBudget));
}

std::string forward_history;

void forward() {
  const auto t0 = Clock::now();
  const auto sc = scenarios::forward_2d();
  const auto out = verify::run_forward(sc);
  const double s = seconds_since(t0);
  const auto r = verify::forward_check(out, kForwardTol);
  forward_history = history_of(out.result, sc.config);
  report(3, "forward desk run", r.passed && s < kForwardBudget, r.detail + "; " + timing(s, kForwardBudget));
}

void inverse() {
  const auto t0 = Clock::now();
  const auto sc = scenarios::inverse_2d(training::Mapping::sigmoid, true);
  const auto res = training::train(sc.config, sc.train, sc.scales);
  const double s = seconds_since(t0);
  const auto r = verify::inverse_check(res, sc.truth, kInverseTol);
  const bool quiet = res.warnings.empty();

  auto lin = scenarios::inverse_2d(training::Mapping::linear, true);
  lin.config.stages = {{1, 1e-3}};
  std::string warned;
  training::TrainHooks hooks;
  hooks.on_warning = [&](const std::string& w) { warned = w; };
  (void)training::train(lin.config, lin.train, lin.scales, hooks);
  const bool warns = warned.find("unsupported inverse preset") != std::string::npos;

  report(4, "inverse desk run", r.passed && quiet && warns && s < kInverseBudget,
         r.detail + "; linear preset warning " + (warns ? "emitted" : "missing") + "; " +
             timing(s, kInverseBudget));
}

void surrogate() {
  const auto t0 = Clock::now();
  const auto sc = scenarios::surrogate_2d();
  const auto res = training::train(sc.config, sc.train, sc.scales);
  const Eigen::MatrixXd pred = training::predict(res.pack, sc.eval.coords, sc.eval.schema, sc.scales);
  const auto err = scenarios::displacement_nrmse(pred, sc.eval.fields, Dim::two);
  const double s = seconds_since(t0);
  std::ostringstream os;
  os << "NRMSE(u) at mu = 0.075 MPa: " << err.worst << " (< " << kSurrogateTol << ")";
  report(5, "surrogate at unseen mu", err.worst < kSurrogateTol && s < kSurrogateBudget,
         os.str() + "; " + timing(s, kSurrogateBudget));
}

void oracles() {
  const auto t0 = Clock::now();
  const verify::CheckResult checks[] = {verify::nrmse_oracle(), verify::adam_first_step(),
                                        verify::lhs_occupancy(), verify::lr_schedule_oracle()};
  const double s = seconds_since(t0);
  bool ok = s < kOracleBudget;
  std::string detail;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    detail += c.name + (c.passed ? " ok" : " FAILED") + " (" + c.detail + "); ";
  }
  report(6, "oracle micro-checks", ok, detail + timing(s, kOracleBudget));
}

void determinism() {
  if (forward_history.empty()) forward_history = [] {
    const auto sc = scenarios::forward_2d();
    return history_of(training::train(sc.config, sc.train, sc.scales), sc.config);
  }();
  const auto sc = scenarios::forward_2d();
  const auto again = history_of(training::train(sc.config, sc.train, sc.scales), sc.config);
  const bool same = again == forward_history && !again.empty();
  report(7, "determinism", same,
         std::string("forward loss history ") + (same ? "bit-identical" : "differs") + " across two runs (" +
             std::to_string(again.size()) + " bytes)");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const auto want = [&](int id) { return wanted.empty() || wanted.count(id) != 0; };
  try {
    if (want(6)) oracles();
    if (want(1)) gradients();
    if (want(2)) residuals();
    if (want(3)) forward();
    if (want(7)) determinism();
    if (want(4)) inverse();
    if (want(5)) surrogate();
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

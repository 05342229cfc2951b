#include "elastodyn/training.hpp"

#include "elastodyn/random.hpp"
#include "elastodyn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace elastodyn::training {

// ---------------------------------------------------------------------------
// Optimizer

AdamState AdamState::fresh(Eigen::Index n, double lr) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  s.lr = lr;
  return s;
}

NonFiniteGradientError::NonFiniteGradientError(long step, Eigen::Index index)
    : std::runtime_error("adam_step: non-finite gradient entry " + std::to_string(index) +
                         " at step " + std::to_string(step)),
      step_(step) {}

void adam_step(AdamState& s, Eigen::VectorXd& params, const Eigen::VectorXd& g) {
  if (g.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw NonFiniteGradientError(s.step_count + 1, i);
  }
  ++s.step_count;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * g;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

std::vector<LrStage> default_schedule() { return {{2000, 1e-3}, {2000, 1e-4}, {2000, 1e-5}}; }

int total_epochs(std::span<const LrStage> stages) {
  int n = 0;
  for (const auto& s : stages) n += s.epochs;
  return n;
}

double lr_schedule(int epoch, std::span<const LrStage> stages) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  int end = 0;
  for (const auto& s : stages) {
    end += s.epochs;
    if (epoch < end) return s.lr;
  }
  throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) +
                          " beyond the last stage (" + std::to_string(end) + " epochs)");
}

// ---------------------------------------------------------------------------
// Modes and mappings

Mode parse_mode(std::string_view s) {
  if (s == "forward") return Mode::forward;
  if (s == "inverse") return Mode::inverse;
  if (s == "surrogate") return Mode::surrogate;
  throw std::invalid_argument("unknown mode '" + std::string(s) +
                              "' (expected forward, inverse or surrogate)");
}

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::forward: return "forward";
    case Mode::inverse: return "inverse";
    case Mode::surrogate: return "surrogate";
  }
  return "?";
}

Mapping parse_mapping(std::string_view s) {
  if (s == "linear") return Mapping::linear;
  if (s == "sigmoid") return Mapping::sigmoid;
  if (s == "tanh") return Mapping::tanh;
  throw std::invalid_argument("unknown mapping '" + std::string(s) +
                              "' (expected linear, sigmoid or tanh)");
}

std::string_view mapping_name(Mapping m) {
  switch (m) {
    case Mapping::linear: return "linear";
    case Mapping::sigmoid: return "sigmoid";
    case Mapping::tanh: return "tanh";
  }
  return "?";
}

double apply_mapping(Mapping f, double n) {
  switch (f) {
    case Mapping::linear: return n;
    case Mapping::sigmoid: return ad::sigmoid(n);
    case Mapping::tanh: return std::tanh(n);
  }
  return n;
}

ad::Var apply_mapping(Mapping f, const ad::Var& n) {
  switch (f) {
    case Mapping::linear: return n;
    case Mapping::sigmoid: return ad::sigmoid(n);
    case Mapping::tanh: return ad::tanh(n);
  }
  return n;
}

MappedMaterial map_material(double n_lambda, double n_mu, Mapping f, double modulus_scale) {
  MappedMaterial m;
  m.lambda_star = apply_mapping(f, n_lambda);
  m.mu_star = apply_mapping(f, n_mu);
  m.lambda = modulus_scale * m.lambda_star;
  m.mu = modulus_scale * m.mu_star;
  return m;
}

std::optional<std::string> preset_warning(Mode mode, Mapping f, bool hard_bc) {
  if (mode != Mode::inverse) return std::nullopt;
  if (f == Mapping::sigmoid && hard_bc) return std::nullopt;
  return "warning: unsupported inverse preset (mapping=" + std::string(mapping_name(f)) +
         ", hard_bc=" + (hard_bc ? "on" : "off") +
         "); only mapping=sigmoid with hard_bc=on is known to identify lambda and mu, other "
         "combinations tend to drift towards lambda + 2 mu ~ 0";
}

// ---------------------------------------------------------------------------
// Output transforms

namespace {

int displacement_count(Dim dim) { return spatial_dims(dim); }

// N x outputs: x* on displacement columns, 1 on stress columns.
Eigen::MatrixXd transform_mask(const Eigen::VectorXd& x_star, Dim dim) {
  const int nu = displacement_count(dim);
  const auto nout = static_cast<Eigen::Index>(output_fields(dim).size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(x_star.size(), nout);
  for (int j = 0; j < nu; ++j) m.col(j) = x_star;
  return m;
}

// 1 x outputs: 1 on displacement columns, 0 elsewhere.
Eigen::MatrixXd displacement_selector(Dim dim) {
  const auto nout = static_cast<Eigen::Index>(output_fields(dim).size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, nout);
  m.leftCols(displacement_count(dim)).setOnes();
  return m;
}

}  // namespace

Eigen::MatrixXd apply_output_transform(const Eigen::MatrixXd& raw, const Eigen::VectorXd& x_star,
                                       Dim dim, bool hard_bc) {
  if (!hard_bc) return raw;
  if (raw.rows() != x_star.size()) throw std::invalid_argument("apply_output_transform: row mismatch");
  return raw.cwiseProduct(transform_mask(x_star, dim));
}

ad::Var apply_output_transform(const ad::Var& raw, const Eigen::VectorXd& x_star, Dim dim,
                               bool hard_bc) {
  if (!hard_bc) return raw;
  if (raw.rows() != x_star.size()) throw std::invalid_argument("apply_output_transform: row mismatch");
  return raw * raw.tape()->constant(transform_mask(x_star, dim));
}

ad::MultiJet<ad::Var> apply_output_transform(const ad::MultiJet<ad::Var>& jets,
                                             const Eigen::VectorXd& x_star, Dim dim, bool hard_bc,
                                             int x_direction) {
  if (!hard_bc) return jets;
  ad::Tape& tape = *jets.value.tape();
  const ad::Var mask = tape.constant(transform_mask(x_star, dim));
  ad::MultiJet<ad::Var> out = ad::map_linear(jets, [&](const ad::Var& s) { return s * mask; });
  if (x_direction >= 0) {
    // d/dx* (x* N) = N + x* dN/dx*
    const auto k = static_cast<std::size_t>(x_direction);
    const ad::Var sel = tape.constant(displacement_selector(dim));
    out.d1[k] = out.d1[k] + jets.value * sel;
    if (out.d2[k]) {
      *out.d2[k] = *out.d2[k] + 2.0 * (jets.d1[k] * sel);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pack and config

Eigen::VectorXd TrainablePack::flatten() const {
  const Eigen::VectorXd n = net.flatten();
  if (!extra) return n;
  Eigen::VectorXd flat(n.size() + 2);
  flat << n, (*extra)[0], (*extra)[1];
  return flat;
}

void TrainablePack::assign(const Eigen::VectorXd& flat) {
  const auto n = static_cast<Eigen::Index>(network::parameter_count(net.dims));
  const Eigen::Index want = n + (extra ? 2 : 0);
  if (flat.size() != want) throw std::invalid_argument("TrainablePack::assign: size mismatch");
  net.assign(flat.head(n));
  if (extra) *extra = {flat[n], flat[n + 1]};
}

void TrainConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("train: no learning-rate stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].epochs < 0) throw std::invalid_argument("train: negative epoch count");
    if (!(stages[i].lr > 0.0) || !std::isfinite(stages[i].lr)) {
      throw std::invalid_argument("train: learning rates must be positive");
    }
    if (i > 0 && stages[i].lr > stages[i - 1].lr) {
      throw std::invalid_argument("train: learning rates must not increase across stages");
    }
  }
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (n_collocation == 0) throw std::invalid_argument("train: n_collocation must be positive");
  if (hidden <= 0 || layers <= 0) throw std::invalid_argument("train: network dims must be positive");
  if (checkpoint_every <= 0) throw std::invalid_argument("train: checkpoint_every must be positive");
  if (weights.alpha.size() != output_fields(dim).size()) {
    throw std::invalid_argument("train: expected " + std::to_string(output_fields(dim).size()) +
                                " alpha weights");
  }
  if (!(material.rho > 0.0)) throw std::invalid_argument("train: material rho must be positive");
  if (mode == Mode::forward) material.validate();
  if (mode == Mode::surrogate && !(material.lambda > 0.0)) {
    throw std::invalid_argument("train: surrogate mode needs a positive lambda");
  }
}

int input_width(Mode mode, Dim dim) {
  return spatial_dims(dim) + 1 + (mode == Mode::surrogate ? 1 : 0);
}

TrainablePack initial_pack(const TrainConfig& c) {
  TrainablePack p;
  const network::Dims dims{input_width(c.mode, c.dim), c.hidden, c.layers,
                           static_cast<int>(output_fields(c.dim).size())};
  p.net = network::init(dims, derive_seed(c.seed, 1));
  if (c.mode == Mode::inverse) p.extra = c.initial_extra;
  p.mapping = c.mapping;
  p.hard_bc = c.hard_bc;
  return p;
}

// ---------------------------------------------------------------------------
// Scaling helpers

Eigen::MatrixXd scaled_inputs(const Eigen::MatrixXd& coords, const data::Schema& schema,
                              const physics::ScaleSet& s) {
  if (coords.cols() != schema.coord_count()) {
    throw std::invalid_argument("scaled_inputs: coordinates do not match schema " + schema.name());
  }
  Eigen::MatrixXd x = coords;
  x.leftCols(schema.spatial()) /= s.length;
  x.col(schema.time_column()) /= s.time;
  if (schema.with_mu) x.col(schema.mu_column()) /= s.modulus;
  return x;
}

Eigen::MatrixXd scaled_fields(const Eigen::MatrixXd& fields, Dim dim, const physics::ScaleSet& s) {
  const auto fs = output_fields(dim);
  if (fields.cols() != static_cast<Eigen::Index>(fs.size())) {
    throw std::invalid_argument("scaled_fields: column count does not match dimension");
  }
  Eigen::MatrixXd out = fields;
  for (std::size_t j = 0; j < fs.size(); ++j) out.col(static_cast<Eigen::Index>(j)) /= s.field(fs[j]);
  return out;
}

Eigen::MatrixXd unscaled_fields(const Eigen::MatrixXd& scaled, Dim dim, const physics::ScaleSet& s) {
  const auto fs = output_fields(dim);
  if (scaled.cols() != static_cast<Eigen::Index>(fs.size())) {
    throw std::invalid_argument("unscaled_fields: column count does not match dimension");
  }
  Eigen::MatrixXd out = scaled;
  for (std::size_t j = 0; j < fs.size(); ++j) out.col(static_cast<Eigen::Index>(j)) *= s.field(fs[j]);
  return out;
}

Eigen::MatrixXd predict(const TrainablePack& pack, const Eigen::MatrixXd& coords,
                        const data::Schema& schema, const physics::ScaleSet& s, int threads) {
  const Eigen::MatrixXd x = scaled_inputs(coords, schema, s);
  if (x.cols() != pack.net.dims.inputs) {
    throw std::invalid_argument("predict: checkpoint expects " + std::to_string(pack.net.dims.inputs) +
                                " inputs, coordinates give " + std::to_string(x.cols()));
  }
  const Eigen::MatrixXd raw = network::forward_batch(pack.net, x, threads);
  return unscaled_fields(apply_output_transform(raw, x.col(0), schema.dim, pack.hard_bc),
                         schema.dim, s);
}

std::vector<std::pair<double, double>> collocation_bounds(const TrainConfig& c,
                                                          const data::ReferenceDataset& d,
                                                          const physics::ScaleSet& s) {
  std::vector<std::pair<double, double>> b;
  for (int a = 0; a < spatial_dims(c.dim); ++a) {
    b.emplace_back(d.geometry.lo[a] / s.length, d.geometry.hi[a] / s.length);
  }
  b.emplace_back(d.geometry.t_lo / s.time, d.geometry.t_hi / s.time);
  if (c.mode == Mode::surrogate) {
    const auto col = d.coords.col(d.schema.mu_column());
    b.emplace_back(col.minCoeff() / s.modulus, col.maxCoeff() / s.modulus);
    if (!(b.back().second > b.back().first)) {
      throw std::invalid_argument("train: surrogate data needs at least two distinct mu values");
    }
  }
  return b;
}

MaterialParams recovered_material(const TrainablePack& pack, const physics::ScaleSet& s, double rho) {
  if (!pack.extra) throw std::invalid_argument("recovered_material: pack has no inverse trainables");
  const auto m = map_material((*pack.extra)[0], (*pack.extra)[1], pack.mapping, s.modulus);
  return {m.lambda, m.mu, rho};
}

// ---------------------------------------------------------------------------
// One step

namespace {

ad::Var col(const ad::Var& m, Eigen::Index j) { return ad::column(m, j); }

}  // namespace

StepEvaluation evaluate_step(const TrainConfig& c, const TrainablePack& pack,
                             const physics::ScaleSet& s, const Eigen::MatrixXd& data_inputs,
                             const Eigen::MatrixXd& data_targets, const Eigen::MatrixXd& colloc,
                             ad::Tape& tape) {
  tape.clear();
  const network::TapeParams tp = network::bind(tape, pack.net);
  std::vector<ad::Var> leaves = tp.leaves();

  std::optional<ad::Var> n_lambda;
  std::optional<ad::Var> n_mu;
  if (pack.extra) {
    n_lambda = tape.variable((*pack.extra)[0]);
    n_mu = tape.variable((*pack.extra)[1]);
    leaves.push_back(*n_lambda);
    leaves.push_back(*n_mu);
  }

  // Data term.
  const ad::Var xd = tape.constant(data_inputs);
  const ad::Var pred =
      apply_output_transform(network::forward(tp, xd), data_inputs.col(0), c.dim, pack.hard_bc);
  const std::vector<ad::Var> data_terms = physics::data_loss(pred, tape.constant(data_targets));

  // Equation term.
  const int spatial = spatial_dims(c.dim);
  std::vector<network::JetDirection> dirs;
  for (int a = 0; a < spatial; ++a) dirs.push_back({a, false});
  dirs.push_back({spatial, true});
  const ad::Var xc = tape.constant(colloc);
  const auto jets = apply_output_transform(network::forward_jets(tp, xc, dirs), colloc.col(0), c.dim,
                                           pack.hard_bc, 0);

  physics::ScaledMaterial<ad::Var> m;
  switch (c.mode) {
    case Mode::forward: {
      const auto sm = physics::scale_material(c.material, s);
      m = {tape.constant(sm.lambda), tape.constant(sm.mu), tape.constant(sm.rho)};
      break;
    }
    case Mode::inverse:
      m = {apply_mapping(pack.mapping, *n_lambda), apply_mapping(pack.mapping, *n_mu),
           tape.constant(c.material.rho / s.density)};
      break;
    case Mode::surrogate:
      m = {tape.constant(c.material.lambda / s.modulus),
           tape.constant(Eigen::MatrixXd(colloc.col(spatial + 1))),
           tape.constant(c.material.rho / s.density)};
      break;
  }

  const auto& v = jets.value;
  const auto d = [&](int dir, int field) { return col(jets.d1[static_cast<std::size_t>(dir)], field); };
  const auto tt = [&](int field) { return col(*jets.d2[static_cast<std::size_t>(spatial)], field); };

  std::vector<ad::Var> eqn_terms;
  if (c.dim == Dim::two) {
    // outputs: ux uy sxx syy sxy
    physics::PointJets2d<ad::Var> j;
    j.sxx = col(v, 2);
    j.syy = col(v, 3);
    j.sxy = col(v, 4);
    j.dsxx_dx = d(0, 2);
    j.dsxy_dx = d(0, 4);
    j.dsxy_dy = d(1, 4);
    j.dsyy_dy = d(1, 3);
    j.dux_dx = d(0, 0);
    j.dux_dy = d(1, 0);
    j.duy_dx = d(0, 1);
    j.duy_dy = d(1, 1);
    j.d2ux_dt2 = tt(0);
    j.d2uy_dt2 = tt(1);
    eqn_terms = physics::equation_loss(physics::residual_2d(j, m, s));
  } else {
    // outputs: ux uy uz sxx syy szz sxy syz sxz
    physics::PointJets3d<ad::Var> j;
    j.sxx = col(v, 3);
    j.syy = col(v, 4);
    j.szz = col(v, 5);
    j.sxy = col(v, 6);
    j.syz = col(v, 7);
    j.sxz = col(v, 8);
    j.dsxx_dx = d(0, 3);
    j.dsxy_dx = d(0, 6);
    j.dsxy_dy = d(1, 6);
    j.dsxz_dx = d(0, 8);
    j.dsxz_dz = d(2, 8);
    j.dsyy_dy = d(1, 4);
    j.dsyz_dy = d(1, 7);
    j.dsyz_dz = d(2, 7);
    j.dszz_dz = d(2, 5);
    j.dux_dx = d(0, 0);
    j.dux_dy = d(1, 0);
    j.dux_dz = d(2, 0);
    j.duy_dx = d(0, 1);
    j.duy_dy = d(1, 1);
    j.duy_dz = d(2, 1);
    j.duz_dx = d(0, 2);
    j.duz_dy = d(1, 2);
    j.duz_dz = d(2, 2);
    j.d2ux_dt2 = tt(0);
    j.d2uy_dt2 = tt(1);
    j.d2uz_dt2 = tt(2);
    eqn_terms = physics::equation_loss(physics::residual_3d(j, m, s));
  }

  const auto total = physics::weighted_total<ad::Var>(data_terms, eqn_terms, c.weights);

  StepEvaluation out;
  std::vector<double> dv;
  std::vector<double> ev;
  for (const auto& t : data_terms) dv.push_back(t.item());
  for (const auto& t : eqn_terms) ev.push_back(t.item());
  out.loss = physics::total_loss(dv, ev, c.weights);
  out.gradient = tape.flat_gradient(total.total, leaves);
  return out;
}

// ---------------------------------------------------------------------------
// Loop

DivergenceError::DivergenceError(const std::string& what, TrainablePack last_good, int epoch,
                                 long step)
    : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch), step_(step) {}

TrainResult train(const TrainConfig& c, const data::ReferenceDataset& d, const physics::ScaleSet& s,
                  const TrainHooks& hooks) {
  c.validate();
  s.validate();
  if (d.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (d.schema.dim != c.dim) throw std::invalid_argument("train: dataset dimension does not match config");
  if (d.schema.with_mu != (c.mode == Mode::surrogate)) {
    throw std::invalid_argument(c.mode == Mode::surrogate
                                    ? "train: surrogate mode needs a dataset with a mu column"
                                    : "train: mu column is only used in surrogate mode");
  }
  const std::size_t n = static_cast<std::size_t>(d.size());
  if (c.batch_size > n) {
    throw std::invalid_argument("train: batch_size " + std::to_string(c.batch_size) +
                                " exceeds dataset size " + std::to_string(n));
  }

  TrainResult result;
  result.pack = initial_pack(c);
  if (auto w = preset_warning(c.mode, c.mapping, c.hard_bc)) {
    result.warnings.push_back(*w);
    if (hooks.on_warning) hooks.on_warning(*w);
  }

  const Eigen::MatrixXd inputs = scaled_inputs(d.coords, d.schema, s);
  const Eigen::MatrixXd targets = scaled_fields(d.fields, d.schema.dim, s);
  const auto bounds = collocation_bounds(c, d, s);

  const int epochs = total_epochs(c.stages);
  Eigen::VectorXd theta = result.pack.flatten();
  AdamState adam = AdamState::fresh(theta.size(), c.stages.front().lr);
  ad::Tape tape;
  long step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    adam.lr = lr_schedule(epoch, c.stages);
    const auto batches = sampling::epoch_batches(n, c.batch_size, derive_seed(c.seed, 2), epoch);
    for (const auto& batch : batches) {
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(batch.size()), inputs.cols());
      Eigen::MatrixXd yb(static_cast<Eigen::Index>(batch.size()), targets.cols());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(batch[i]));
        yb.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(batch[i]));
      }
      const auto colloc =
          sampling::lhs(c.n_collocation, bounds, derive_seed(derive_seed(c.seed, 3), step));

      StepEvaluation ev;
      try {
        ev = evaluate_step(c, result.pack, s, xb, yb, colloc.points, tape);
        if (!std::isfinite(ev.loss.total)) throw ad::NonFiniteError("total_loss", false);
        adam_step(adam, theta, ev.gradient);
      } catch (const ad::NonFiniteError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step) + ": " + e.what(),
                              result.pack, epoch, step);
      } catch (const NonFiniteGradientError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step) + ": " + e.what(),
                              result.pack, epoch, step);
      }

      HistoryRow row;
      row.epoch = epoch;
      row.step = step;
      row.lr = adam.lr;
      row.loss = std::move(ev.loss);
      if (result.pack.extra) {
        const auto mm = map_material((*result.pack.extra)[0], (*result.pack.extra)[1],
                                     result.pack.mapping, s.modulus);
        row.lambda = mm.lambda;
        row.mu = mm.mu;
      }
      result.history.push_back(std::move(row));

      result.pack.assign(theta);
      ++step;
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, result.pack);
    if (hooks.on_checkpoint && (epoch + 1) % c.checkpoint_every == 0) {
      hooks.on_checkpoint(epoch + 1, result.pack);
    }
  }
  if (hooks.on_checkpoint && epochs % c.checkpoint_every != 0) hooks.on_checkpoint(epochs, result.pack);

  if (c.mode == Mode::inverse) result.recovered = recovered_material(result.pack, s, c.material.rho);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    os << std::setprecision(17);
    os << "elastodyn_checkpoint 1\n";
    os << "mode " << mode_name(cp.mode) << '\n';
    os << "schema " << cp.schema.name() << '\n';
    os << "epoch " << cp.epoch << '\n';
    os << "geometry";
    for (int i = 0; i < 3; ++i) os << ' ' << cp.geometry.lo[i] << ' ' << cp.geometry.hi[i];
    os << ' ' << cp.geometry.t_lo << ' ' << cp.geometry.t_hi << '\n';
    const auto& s = cp.scales;
    os << "scales " << s.length << ' ' << s.time << ' ' << s.modulus << ' ' << s.density;
    for (Field f : kFields3d) os << ' ' << s.field(f);
    os << '\n';
    os << "material " << cp.material.lambda << ' ' << cp.material.mu << ' ' << cp.material.rho << '\n';
    os << "mapping " << mapping_name(cp.pack.mapping) << '\n';
    os << "hard_bc " << (cp.pack.hard_bc ? 1 : 0) << '\n';
    if (cp.pack.extra) os << "extra " << (*cp.pack.extra)[0] << ' ' << (*cp.pack.extra)[1] << '\n';
    os << "params\n";
    network::write_params(os, cp.pack.net);
    if (!os) throw std::runtime_error("checkpoint write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto fail = [&](const std::string& what) -> void {
    throw std::runtime_error("checkpoint " + path.string() + ": " + what);
  };
  std::string key;
  int version = 0;
  if (!(is >> key >> version) || key != "elastodyn_checkpoint" || version != 1) {
    fail("not a checkpoint file");
  }
  Checkpoint cp;
  bool have_params = false;
  while (is >> key) {
    if (key == "mode") {
      std::string v;
      is >> v;
      cp.mode = parse_mode(v);
    } else if (key == "schema") {
      std::string v;
      is >> v;
      cp.schema = data::Schema::parse(v);
      cp.geometry.dim = cp.schema.dim;
    } else if (key == "epoch") {
      is >> cp.epoch;
    } else if (key == "geometry") {
      for (int i = 0; i < 3; ++i) is >> cp.geometry.lo[i] >> cp.geometry.hi[i];
      is >> cp.geometry.t_lo >> cp.geometry.t_hi;
    } else if (key == "scales") {
      auto& s = cp.scales;
      is >> s.length >> s.time >> s.modulus >> s.density;
      for (Field f : kFields3d) is >> s.field(f);
    } else if (key == "material") {
      is >> cp.material.lambda >> cp.material.mu >> cp.material.rho;
    } else if (key == "mapping") {
      std::string v;
      is >> v;
      cp.pack.mapping = parse_mapping(v);
    } else if (key == "hard_bc") {
      int v = 0;
      is >> v;
      cp.pack.hard_bc = v != 0;
    } else if (key == "extra") {
      std::array<double, 2> e{};
      is >> e[0] >> e[1];
      cp.pack.extra = e;
    } else if (key == "params") {
      cp.pack.net = network::read_params(is);
      have_params = true;
      break;
    } else {
      fail("unknown key '" + key + "'");
    }
    if (!is) fail("bad value for '" + key + "'");
  }
  if (!have_params) fail("missing parameter block");
  cp.scales.validate();
  if (cp.pack.net.dims.inputs != cp.schema.coord_count()) {
    fail("network inputs do not match schema " + cp.schema.name());
  }
  return cp;
}

void write_history_csv(std::ostream& os, std::span<const HistoryRow> history, Dim dim, Mode mode) {
  os << "epoch,step,lr,loss_total,loss_data,loss_eqn";
  for (Field f : output_fields(dim)) os << ",data_" << field_name(f);
  for (auto name : residual_names(dim)) os << ",eqn_" << name;
  if (mode == Mode::inverse) os << ",lambda,mu";
  os << '\n';
  os << std::setprecision(17);
  for (const auto& r : history) {
    os << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss.total << ',' << r.loss.data_total
       << ',' << r.loss.eqn_total;
    for (double v : r.loss.data_terms) os << ',' << v;
    for (double v : r.loss.eqn_terms) os << ',' << v;
    if (mode == Mode::inverse) os << ',' << r.lambda.value_or(0.0) << ',' << r.mu.value_or(0.0);
    os << '\n';
  }
}

std::vector<double> epoch_means(std::span<const HistoryRow> history) {
  std::vector<double> means;
  std::size_t i = 0;
  while (i < history.size()) {
    const int e = history[i].epoch;
    double acc = 0.0;
    std::size_t k = 0;
    for (; i < history.size() && history[i].epoch == e; ++i, ++k) acc += history[i].loss.total;
    means.push_back(acc / static_cast<double>(k));
  }
  return means;
}

}  // namespace elastodyn::training

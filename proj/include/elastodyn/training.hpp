#pragma once

// Adam, learning-rate stages, output transforms and the training loop for the
// forward, inverse and surrogate modes.

#include "elastodyn/autodiff/jet.hpp"
#include "elastodyn/autodiff/tape.hpp"
#include "elastodyn/data.hpp"
#include "elastodyn/fields.hpp"
#include "elastodyn/network.hpp"
#include "elastodyn/physics.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace elastodyn::training {

// ---------------------------------------------------------------------------
// Optimizer

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr = 1e-3;

  static AdamState fresh(Eigen::Index n, double lr = 1e-3);
};

class NonFiniteGradientError : public std::runtime_error {
 public:
  NonFiniteGradientError(long step, Eigen::Index index);
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& gradient);

struct LrStage {
  int epochs = 0;
  double lr = 1e-3;
};

/// 2000 epochs each at 1e-3, 1e-4, 1e-5.
std::vector<LrStage> default_schedule();

int total_epochs(std::span<const LrStage> stages);

/// Learning rate of the stage containing `epoch`. Throws past the last stage.
double lr_schedule(int epoch, std::span<const LrStage> stages);

// ---------------------------------------------------------------------------
// Modes, mappings and transforms

enum class Mode { forward, inverse, surrogate };
enum class Mapping { linear, sigmoid, tanh };

Mode parse_mode(std::string_view s);
std::string_view mode_name(Mode m);
Mapping parse_mapping(std::string_view s);
std::string_view mapping_name(Mapping m);

double apply_mapping(Mapping f, double n);
ad::Var apply_mapping(Mapping f, const ad::Var& n);

struct MappedMaterial {
  double lambda_star = 0.0;
  double mu_star = 0.0;
  double lambda = 0.0;  // MPa
  double mu = 0.0;      // MPa
};

/// lambda* = f(N_lambda), mu* = f(N_mu), then rescaled by the modulus scale.
MappedMaterial map_material(double n_lambda, double n_mu, Mapping f, double modulus_scale);

/// Warning text for inverse presets other than sigmoid with hard constraints;
/// nullopt for the supported preset and for the other modes.
std::optional<std::string> preset_warning(Mode mode, Mapping f, bool hard_bc);

/// Multiplies displacement heads by the scaled x coordinate so they vanish at
/// x = 0. Rows of `raw` are points; `x_star` holds their scaled x.
Eigen::MatrixXd apply_output_transform(const Eigen::MatrixXd& raw, const Eigen::VectorXd& x_star,
                                       Dim dim, bool hard_bc);

/// Tape version over value and derivative streams. `x_direction` is the
/// index of the d/dx stream in `jets` (product rule), or -1 if absent.
ad::MultiJet<ad::Var> apply_output_transform(const ad::MultiJet<ad::Var>& jets,
                                             const Eigen::VectorXd& x_star, Dim dim, bool hard_bc,
                                             int x_direction);
ad::Var apply_output_transform(const ad::Var& raw, const Eigen::VectorXd& x_star, Dim dim,
                               bool hard_bc);

// ---------------------------------------------------------------------------
// Configuration and state

struct TrainablePack {
  network::ModifiedMlpParams net;
  std::optional<std::array<double, 2>> extra;  // (N_lambda, N_mu) in inverse mode
  Mapping mapping = Mapping::sigmoid;
  bool hard_bc = false;

  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

struct TrainConfig {
  Mode mode = Mode::forward;
  Dim dim = Dim::two;
  std::vector<LrStage> stages = default_schedule();
  std::size_t batch_size = 142;
  std::size_t n_collocation = 500;
  physics::LossWeights weights = physics::LossWeights::unit(Dim::two);
  std::uint64_t seed = 0;
  int hidden = 64;
  int layers = 4;
  Mapping mapping = Mapping::sigmoid;
  bool hard_bc = false;
  /// Known material. Inverse mode uses only rho; surrogate mode takes mu
  /// from the input column.
  MaterialParams material;
  /// Initial raw inverse trainables.
  std::array<double, 2> initial_extra{0.0, 0.0};
  int checkpoint_every = 100;

  void validate() const;
};

struct HistoryRow {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  physics::LossBreakdown loss;
  std::optional<double> lambda;  // inverse mode, MPa
  std::optional<double> mu;
};

/// Scaled inputs (x*, y*, [z*], t*, [mu*]) of dataset coordinates.
Eigen::MatrixXd scaled_inputs(const Eigen::MatrixXd& coords, const data::Schema& schema,
                              const physics::ScaleSet& s);
/// Fields divided by their scales.
Eigen::MatrixXd scaled_fields(const Eigen::MatrixXd& fields, Dim dim, const physics::ScaleSet& s);
/// Inverse of scaled_fields.
Eigen::MatrixXd unscaled_fields(const Eigen::MatrixXd& scaled, Dim dim, const physics::ScaleSet& s);

/// Physical-unit predictions of a trained pack at dataset-style coordinates.
Eigen::MatrixXd predict(const TrainablePack& pack, const Eigen::MatrixXd& coords,
                        const data::Schema& schema, const physics::ScaleSet& s, int threads = 1);

struct TrainHooks {
  /// Called after each epoch with that epoch's rows.
  std::function<void(int epoch, const TrainablePack&)> on_epoch;
  /// Called every checkpoint_every epochs and at the end.
  std::function<void(int epoch, const TrainablePack&)> on_checkpoint;
  /// Receives warnings as they are raised.
  std::function<void(const std::string&)> on_warning;
};

struct TrainResult {
  TrainablePack pack;
  std::vector<HistoryRow> history;
  std::optional<MaterialParams> recovered;
  std::vector<std::string> warnings;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, TrainablePack last_good, int epoch, long step);
  const TrainablePack& last_good() const noexcept { return last_good_; }
  int epoch() const noexcept { return epoch_; }
  long step() const noexcept { return step_; }

 private:
  TrainablePack last_good_;
  int epoch_;
  long step_;
};

/// Fresh pack for the configuration and dataset schema.
TrainablePack initial_pack(const TrainConfig& config);

/// Network input width for a mode and dimension.
int input_width(Mode mode, Dim dim);

/// Loss of one step and its gradient with respect to pack.flatten().
struct StepEvaluation {
  physics::LossBreakdown loss;
  Eigen::VectorXd gradient;
};

/// Evaluates the total loss of `pack` on a scaled data batch and a scaled
/// collocation batch, with gradients through every trainable.
StepEvaluation evaluate_step(const TrainConfig& config, const TrainablePack& pack,
                             const physics::ScaleSet& scales, const Eigen::MatrixXd& data_inputs,
                             const Eigen::MatrixXd& data_targets,
                             const Eigen::MatrixXd& collocation, ad::Tape& tape);

/// Scaled collocation box: spatial extents and time from the geometry, plus
/// the mu range of the data in surrogate mode.
std::vector<std::pair<double, double>> collocation_bounds(const TrainConfig& config,
                                                          const data::ReferenceDataset& data,
                                                          const physics::ScaleSet& scales);

TrainResult train(const TrainConfig& config, const data::ReferenceDataset& data,
                  const physics::ScaleSet& scales, const TrainHooks& hooks = {});

/// Material implied by the pack's trainables (inverse mode).
MaterialParams recovered_material(const TrainablePack& pack, const physics::ScaleSet& scales,
                                  double rho);

// ---------------------------------------------------------------------------
// Checkpoints and history

struct Checkpoint {
  Mode mode = Mode::forward;
  data::Schema schema;
  data::Geometry geometry;
  physics::ScaleSet scales;
  MaterialParams material;
  TrainablePack pack;
  int epoch = 0;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// epoch,step,lr,loss_total,loss_data,loss_eqn,data_<field>...,eqn_<name>...,[lambda,mu]
void write_history_csv(std::ostream& os, std::span<const HistoryRow> history, Dim dim, Mode mode);

/// Mean total loss per epoch, in epoch order.
std::vector<double> epoch_means(std::span<const HistoryRow> history);

}  // namespace elastodyn::training

#pragma once

// Config-driven front end: `train`, `predict` and `verify`.
//
// Exit codes: 0 success, 1 failure (bad input, failed check), 2 config
// error, 3 training diverged.

#include "elastodyn/data.hpp"
#include "elastodyn/physics.hpp"
#include "elastodyn/training.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace elastodyn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// INI-style key/value file. Keys before the first [section] live in the
/// root section "". `#` and `;` start comments. Only `wave` may repeat.
struct RawConfig {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, std::vector<Entry>> values;  // "section.key" (or "key")

  static RawConfig parse(std::istream& is);
  static RawConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const Entry& get(const std::string& key) const;
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal polyline chart. With log_y, non-positive values are dropped.
void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::vector<Series>& series, bool log_y);

/// Everything a training run needs, resolved from a config file.
struct RunPlan {
  training::TrainConfig config;
  data::ReferenceDataset train;
  data::ReferenceDataset eval;
  physics::ScaleSet scales;
  std::optional<MaterialParams> truth;  // inverse: known answer, if given
  std::optional<data::GridSpec> eval_grid;
  std::filesystem::path output_dir;
  int threads = 1;
};

/// Validates and resolves a config. Throws ConfigError naming the line or
/// the missing key.
RunPlan plan_from_config(const RawConfig& raw, const std::filesystem::path& base_dir = ".");

/// Effective thread count: ELASTODYN_THREADS if set, else `configured`.
int effective_threads(int configured);

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

struct PredictRequest {
  std::filesystem::path checkpoint;
  data::GridSpec grid;
  std::optional<double> mu;
  std::filesystem::path out;
  int threads = 1;
};

/// Parses "nx,ny,nt" (2D) or "nx,ny,nz,nt" (3D).
data::GridSpec parse_grid(const std::string& s, Dim dim);

int cmd_predict(const PredictRequest& req, std::ostream& out, std::ostream& err);

/// `inject_fault` turns on the residual fault fixture (tests only).
int cmd_verify(const std::string& level, bool inject_fault, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace elastodyn::cli

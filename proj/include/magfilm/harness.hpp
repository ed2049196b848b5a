#pragma once

#include "magfilm/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace magfilm {

/// Schema violation in a run configuration; the message carries file:line:column.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invariant suite or audit failure reported by an experiment.
class InvariantFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { static_min, evolve, gamma_sweep, stray_diag, validate };
enum class ModelKind { plate, bulk };

Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);

struct GeometrySpec {
  int nx = 16, ny = 16, nz = 3;
  double lx = 1.0, ly = 1.0;
  double h = 0.25;
  std::vector<double> h_list;
  Edge edge = Edge::left;
};

struct RunConfig {
  std::optional<Experiment> experiment;
  ModelKind model = ModelKind::plate;
  std::uint64_t seed = 12345;
  std::string output_dir = "out";
  GeometrySpec geometry;

  double m_sat = 1.0;
  double alpha = 0.0;
  Mat6 elasticity_voigt;  ///< raw table; checked when materials() is built
  AnisotropyModel anisotropy = AnisotropyModel::uniaxial(0.0, 0.0, Vec3::UnitX(), ThicknessScaling::constant(1.0));
  DissipationParams dissipation;

  LoadSchedule schedule = LoadSchedule::constant(1.0);
  int steps = 20;
  SolverConfig solver;
  StrayOptions stray;
  std::optional<Vec3> initial_direction;  ///< defaults to the first easy axis
  bool snapshots = false;

  std::string source;  ///< file name used in messages
  std::string sha256;  ///< hash of the raw config text

  /// Validates the stiffness table (throws ModelError) and assembles the materials.
  Materials materials() const;
  Vec3 initial_axis() const;
};

/// Parses YAML text; `source` names the text in error messages.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>",
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;  ///< overrides config and environment
  bool deterministic = false;
  bool quiet = false;
};

/// Output directory: option, then MAGFILM_OUTPUT_DIR, then the config value.
std::filesystem::path resolve_output_dir(const RunConfig& cfg, const RunOptions& opts);

struct RunReport {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> lines;  ///< human-readable summary
};

struct StaticResult {
  EnergyBreakdown energy;
  std::vector<Vec3> m;
  std::vector<Vec3> u;  ///< per node; plates report (v1, v2, v)
};

struct SweepRow {
  double h = 0.0;
  int nz = 0;
  double energy_h = 0.0, energy_0 = 0.0, gap = 0.0;
  double elastic_h = 0.0, elastic_0 = 0.0, elastic_gap = 0.0;
  double stray_h = 0.0, stray_0 = 0.0, stray_gap = 0.0;
  /// Uniform initial datum held fixed, displacement minimized.
  double fixed_elastic_h = 0.0, fixed_elastic_0 = 0.0, fixed_elastic_gap = 0.0;
  double fixed_stray_h = 0.0, fixed_stray_0 = 0.0, fixed_stray_gap = 0.0;
};

struct SuiteCheck {
  std::string suite;
  std::string invariant;
  bool passed = false;
  std::string detail;
};

StaticResult run_static(const RunConfig& cfg);
std::vector<SweepRow> run_gamma_sweep(const RunConfig& cfg);
std::vector<StrayDiagnosticRow> run_stray_diag(const RunConfig& cfg);
std::vector<SuiteCheck> run_validate(const RunConfig& cfg);

/// Grid, schedule and initial state shared by the experiments.
Grid make_grid(const RunConfig& cfg, ModelKind kind, std::optional<double> h = std::nullopt);

/// Runs the experiment, writes its files and throws InvariantFailure when an audit fails.
RunReport run_experiment(const RunConfig& cfg, Experiment e, const RunOptions& opts);

}  // namespace magfilm

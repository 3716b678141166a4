#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bozd/bo_solver.hpp"
#include "bozd/identity_lab.hpp"
#include "bozd/line_function.hpp"

namespace bozd::cli {

using json = nlohmann::json;

/// 0 success, 2 validation, 3 regime refusal, 4 numerical failure.
int exit_code(ErrorKind kind);

std::uint64_t fnv1a64(std::string_view bytes);

const std::vector<std::string>& command_names();

/// Named constructors for initial data, read from the "initial_data"
/// object: {"family": "gaussian", "a": 1, "sigma": 1}.
class FamilyRegistry {
 public:
  static const std::vector<std::string>& names();
  /// Relative CSV paths (custom_sampled) resolve against base_dir.
  static RealLineFunction make(const json& spec, const std::filesystem::path& base_dir = {});
  /// Parameter names each family accepts, for unknown-key warnings.
  static std::vector<std::string> parameters(const std::string& family);
};

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  ErrorKind kind = ErrorKind::Validation;
  /// JSON path such as "numerics.m" or "z_points[2]".
  std::string field;
  std::string message;
  /// 1-based line in the config text, 0 when unknown.
  int line = 0;

  std::string str() const;
};

struct NumericsConfig {
  /// Unset: chosen from the decay of u0^.
  std::optional<double> xi_max;
  int m = 2048;
  double window = 1000.0;
  int order = 6;
  double dt = 1e-3;
  int n_modes = 4096;
  /// Solver half-width; unset means 40 for bo-solve and 20 for eps-sweep.
  std::optional<double> L;
  Integrator integrator = Integrator::ETDRK4;
  /// Terms kept by the Neumann route (0: skip it).
  int n_max = 0;
  Tolerances tol{};
};

struct IdentityConfig {
  std::vector<int> lemma_n{1, 2, 3};
  std::vector<int> region_n{2, 3};
  std::vector<int> toeplitz_n{2, 3, 4};
  std::vector<int> qmc_n{4};
  bool include_complex = true;
};

struct ExperimentConfig {
  std::string command;
  json initial_data;
  std::vector<double> t;
  std::vector<cplx> z_points;
  std::vector<double> x_points;
  std::vector<double> eps;
  NumericsConfig numerics;
  IdentityConfig identity;
  std::string output_dir = "out";
  std::uint64_t seed = 20240521;
  int threads = 1;

  /// The parsed document, kept for hashing, and its source text for
  /// line numbers in diagnostics.
  json raw;
  std::string text;
  /// Directory of the config file; relative data paths resolve here.
  std::filesystem::path base_dir;
  /// Built from initial_data during parsing.
  std::optional<RealLineFunction> u0;
};

struct LoadResult {
  std::optional<ExperimentConfig> config;
  std::vector<Diagnostic> diagnostics;
  bool ok() const;
};

/// Parses a JSON document. `command` from the command line must match the
/// document's "command" when both are present.
LoadResult parse_config(std::string_view text, std::string_view command = {},
                        const std::filesystem::path& base_dir = {});
LoadResult load_config(const std::filesystem::path& path, std::string_view command = {});

/// Range, class and regime checks; never throws.
std::vector<Diagnostic> validate(const ExperimentConfig& config);

/// FNV-1a of the canonical config (sorted keys) with the effective seed and
/// without output_dir or threads, which do not change any artifact.
std::string config_hash(const ExperimentConfig& config);

struct RunResult {
  int exit_code = 0;
  std::string message;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs the experiment and writes its tables, JSON summaries and plot
/// scripts below output_dir. Errors are caught and mapped to exit codes.
RunResult run(const ExperimentConfig& config, std::ostream* log = nullptr);

}  // namespace bozd::cli

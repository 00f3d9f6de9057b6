#pragma once
// Experiment configuration: INI-style files with sections, command-line
// overrides and validation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "muellertf/mueller.hpp"

namespace mtf {

enum class Command {
  TfSolve,
  ExteriorTf,
  SommerfeldCheck,
  MuellerSolve,
  IonizationSweep,
  ScreenCompare,
  LemmaReport,
  SemiclassicsCheck,
};

std::string to_string(Command c);
/// Throws ConfigError for unknown names.
Command command_from_string(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  Command command = Command::TfSolve;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  // TF grid: r_min / Z .. r_max with n nodes.
  double tf_r_min = 1e-6;
  double tf_r_max = 1e5;
  std::size_t tf_n = 4000;

  std::vector<double> Z{1.0};
  /// Electron number; 0 selects N = Z.
  double N = 0.0;
  /// Exterior TF charges.
  std::vector<double> z{1.0};
  std::vector<double> r{1.0};
  std::vector<double> s{0.5};
  std::vector<double> lambda{0.25};
  /// Outer radii of the key identity.
  std::vector<double> R{2.0};
  /// Radii of screening profiles; empty selects a logarithmic default.
  std::vector<double> radii;
  double epsilon = 1.0 / 66.0;
  /// Sommerfeld window in units of the TF length of Z (full TF) or z
  /// (exterior, starting no closer than 10 r).
  double window_lo = 300.0;
  double window_hi = 3000.0;

  MuellerOptions mueller;

  /// Throws ConfigError when a value is out of range.
  void validate() const;
};

/// Parses the INI text. Unknown sections or keys, malformed numbers and an
/// empty document throw ConfigError. The result is validated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical INI text; parse_config(to_ini(c)) reproduces c exactly.
std::string to_ini(const ExperimentConfig& c);

/// Applies `key=value` or `section.key=value`. Lists accept `a,b,c` and the
/// integer range `a..b`. Throws ConfigError. Does not validate.
void apply_override(ExperimentConfig& c, const std::string& assignment);

/// SHA-256 of to_ini(c) with the output directory left out, hex encoded.
std::string config_hash(const ExperimentConfig& c);

/// Project version and, when known at build time, the git revision.
std::string code_version();

}  // namespace mtf

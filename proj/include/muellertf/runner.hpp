#pragma once
// Experiment runner: executes a configuration, writes artifacts and a
// manifest, and consolidates run directories into summaries.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "muellertf/config.hpp"

namespace mtf {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int invalid_config = 2;
inline constexpr int not_converged = 3;
inline constexpr int io_failure = 4;
}  // namespace exit_code

/// Runs `n` independent jobs on up to `threads` workers. Results land at
/// their index, so the merge does not depend on scheduling. The first
/// exception by index is rethrown after all jobs finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job);

/// Executes the configuration and writes its artifacts plus manifest.json
/// into config.out. Returns one of the exit codes; progress goes to `log`.
int run(const ExperimentConfig& config, std::ostream& log);

/// Scans `dir` for manifest.json files and writes summary.md and
/// summary.csv into it. Pinned metrics are read from `pins` (default
/// dir/pins.json when present); drift beyond a pin is listed as a
/// regression. With `write_pins` the current metrics are stored as pins.
/// Returns exit_code::invalid_config when no manifest is found.
int report(const std::filesystem::path& dir, std::ostream& log,
           const std::optional<std::filesystem::path>& pins = std::nullopt,
           const std::optional<std::filesystem::path>& write_pins = std::nullopt);

}  // namespace mtf

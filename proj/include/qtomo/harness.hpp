#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "qtomo/io.hpp"

namespace qtomo {

std::string_view version();

/// Overrides from the command line; they win over the config document.
struct CommandLine {
  std::string command;
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
};

/// A validated run: every key resolved to a value, defaults filled in.
struct RunConfig {
  std::string command;
  io::Json resolved;                 // echoed into every report
  std::filesystem::path base_dir;    // relative paths in the config resolve here
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
  int threads = 0;
};

/// Validates `doc` against the schema for `command`; unknown keys, wrong
/// types and out-of-range values raise ConfigError naming the key path.
RunConfig resolve_config(const CommandLine& cli, const io::Json& doc,
                         const std::filesystem::path& base_dir);
/// Reads and parses cli.config, then resolves it.
RunConfig load_config(const CommandLine& cli);

Protocol build_protocol(const io::Json& spec, const std::filesystem::path& base_dir);
DensityMatrix build_state(const io::Json& spec, const std::filesystem::path& base_dir);

/// Runs one command and returns its report (also written under out_dir).
io::Json execute(const RunConfig& config);

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

/// load_config + execute with errors mapped to exit codes; the report goes to
/// `out`, diagnostics to `err`.
int run(const CommandLine& cli, std::ostream& out, std::ostream& err);

}  // namespace qtomo

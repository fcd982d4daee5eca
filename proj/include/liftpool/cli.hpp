#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace liftpool::cli {

enum class Command { decompose, train, compare, bench, gradcheck };
std::string command_name(Command c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitNumerical = 3;

struct CommandConfig {
  Command command = Command::train;

  // Shared model and loss settings.
  std::string pool = "tlp";
  std::size_t kernel = 5;  // K
  std::string fusion = "sum";
  std::size_t weighting_kernel = 5;
  std::string sharing = "independent";
  std::string weighting_form = "residual";
  std::string weighting_norm = "instance";
  std::string arch = "standard";
  std::string placement = "both";
  std::size_t hidden = 16;
  double alpha_u = 1e-3;
  double alpha_p = 1e-3;
  std::uint64_t seed = 0;

  // Paths.
  std::string input;
  std::string out;
  std::string checkpoint;

  // decompose
  std::size_t layer = 1;
  bool reconstruct = false;

  // train / compare
  std::string task = "band-mix";
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::size_t train_size = 800;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  double noise = 0.3;
  std::vector<std::string> specs;  // compare / bench; empty means the default list
  std::size_t seeds = 0;           // compare: 5, gradcheck: 20 when left at 0
  std::size_t threads = 0;

  // bench
  std::size_t length = 128;
  std::size_t bench_batch = 16;
  std::size_t repetitions = 5;
  std::size_t warmup = 2;
  std::size_t accuracy_seeds = 0;
  std::size_t accuracy_epochs = 5;

  // gradcheck
  std::vector<std::string> cases;
};

// Thrown for --help; carries the help text. Exit code 0.
struct HelpRequested {
  std::string text;
};

// args excludes the program name: {"train", "--pool", "max"}. Throws
// UsageError for unknown subcommands, flags and invalid values.
CommandConfig parse_args(const std::vector<std::string>& args);

// Every resolved field of the configuration.
nlohmann::json resolved_config(const CommandConfig& config);

// Runs the command; errors become exit codes with a message on `err`.
int dispatch(const CommandConfig& config, std::ostream& out, std::ostream& err);

// parse_args + dispatch with usage handling, for main().
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace liftpool::cli

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "liftpool/tape.hpp"

namespace liftpool::harness {

inline constexpr double kOpTolerance = 1e-5;
inline constexpr double kCompositionTolerance = 1e-4;

struct GradCheckOptions {
  std::size_t seeds = 20;
  std::uint64_t base_seed = 0;
  double eps = 1e-5;
};

struct GradCheckResult {
  std::string name;
  bool composition = false;
  std::size_t seeds = 0;
  double max_rel_error = 0.0;  // worst over seeds
  double tolerance = 0.0;
  bool passed = false;
};

// Builds a scalar from tensors that the case owns. Every leaf must enter the
// tape through tape.param(leaf) so its gradient can be read back.
using ScalarBuilder = std::function<Var(Tape&)>;

// ||g_tape - g_fd|| / (||g_tape|| + ||g_fd||) with all leaves flattened into
// one vector.
double leaf_gradient_error(const ScalarBuilder& build, const std::vector<Tensor*>& leaves, double eps);

std::vector<std::string> gradcheck_case_names();
std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options = {});
// Only the named cases; unknown names throw ConfigError.
std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options, const std::vector<std::string>& names);

}  // namespace liftpool::harness

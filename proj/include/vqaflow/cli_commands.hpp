#pragma once

#include <string>
#include <vector>

#include "vqaflow/types.hpp"

namespace vqaflow::cli {

/// Apply repeatable --ablation values (no-cot, no-counter, no-multi-agent)
/// to a base configuration; unknown names raise a config error listing the
/// valid ones.
AblationConfig apply_ablations(AblationConfig base, const std::vector<std::string>& names);

/// Full command-line entry point. Returns the process exit code: 0 success,
/// 1 usage or configuration problem, 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace vqaflow::cli

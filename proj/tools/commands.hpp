#pragma once

#include <CLI11.hpp>

namespace msl::cli {

enum ExitCode : int { kOk = 0, kError = 1, kFindings = 2, kUsage = 64 };

// Each register_* adds a subcommand tree to `parent`; the callbacks store
// their exit code in `status`.
void register_dataset(CLI::App& parent, int& status);
void register_detect(CLI::App& parent, int& status);
void register_eval(CLI::App& parent, int& status);

}  // namespace msl::cli

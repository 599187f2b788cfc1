// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace avmask::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Entry point behind the avmask executable. Subcommands: gen-data, pretrain,
// finetune, eval, gradcheck, ablate. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace avmask::cli

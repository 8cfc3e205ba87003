#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scalebench {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitGate = 2,
  kExitNonFinite = 3,
};

/// Subcommands: pretrain, finetune, evaluate, flops, report, synth.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scalebench

#pragma once

namespace ptq::cli {

// Parses arguments, runs one subcommand and returns the process exit code:
// 0 ok, 1 unexpected failure, 2 input or configuration, 3 polychoric,
// 4 factor analysis, 5 GLM.
int run(int argc, char** argv);

}  // namespace ptq::cli

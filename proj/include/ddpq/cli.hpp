#pragma once

// Command-line front end: simulate, fit, quantile, baseline, bp-demo, bench.
// Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace ddpq {

/// `args` excludes the program name. Results go to `out` unless --out is
/// given; diagnostics go to `err` as one line starting with "error:".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace ddpq

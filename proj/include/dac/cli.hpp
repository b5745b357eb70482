#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dac::cli {

/// Runs one subcommand. `args` excludes the program name. Returns the exit
/// code: 0 on success, 1 on a data error, 2 on a usage error. Output that
/// is not written to a file goes to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

std::string version();

}  // namespace dac::cli

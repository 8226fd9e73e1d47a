#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace klsda::cli {

// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.
enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

// "lo:hi:count" -> log-spaced grid. Throws UsageError.
std::vector<double> parse_grid_spec(const std::string& spec);

}  // namespace klsda::cli

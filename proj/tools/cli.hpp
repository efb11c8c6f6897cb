#ifndef ARVSU_TOOLS_CLI_HPP
#define ARVSU_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace arvsu::cli {

inline constexpr const char* kToolVersion = "1.0.0";

// Runs one subcommand. args excludes the program name. Errors are reported
// on `err` as a single "error[<kind>]: <message>" line; returns the exit code
// (0 success, 1 failure, 2 usage error).
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace arvsu::cli

#endif  // ARVSU_TOOLS_CLI_HPP

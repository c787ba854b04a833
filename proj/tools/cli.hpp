#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace liftu::cli {

/// Runs the command line in-process. Returns the exit code: 0 success,
/// 2 input error, 3 inference error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace liftu::cli

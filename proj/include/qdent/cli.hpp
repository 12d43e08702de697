#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qdent::cli {

/// Runs the command line `args` (without the program name). Results go to
/// `out`; failures are reported on `err` as one JSON object and mapped to
/// the exit code of the error kind (2 invalid input, 3 estimation failure,
/// 4 I/O error).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdent::cli

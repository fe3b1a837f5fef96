#pragma once

#include "qcreg/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qcreg::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_input_error = 2,
    exit_unsupported = 3,
    exit_numeric_failure = 4,
};

[[nodiscard]] int exit_code_for(ErrorCode code) noexcept;

/// Entry point shared by the executable and the tests. args[0] is the
/// program name. Diagnostics go to err as one line each.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qcreg::cli

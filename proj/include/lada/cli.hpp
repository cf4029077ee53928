#pragma once

#include <iosfwd>

namespace lada::cli {

// Runs one subcommand. Exit codes: 0 success, 1 usage error, 2 runtime failure.
int dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace lada::cli

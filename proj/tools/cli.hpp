#pragma once

#include <iosfwd>

namespace dpacheck::cli {

// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 external service error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dpacheck::cli

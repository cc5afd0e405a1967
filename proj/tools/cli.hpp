#pragma once

// Command-line front end. Kept apart from main() so tests can call it with
// captured streams.

#include <ostream>

namespace concord::cli {

// Exit codes: 0 ok, 2 validation, 3 backend, 4 corruption, 1 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace concord::cli

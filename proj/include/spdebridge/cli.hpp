#pragma once

#include <iosfwd>

namespace spdebridge {

/// Entry point behind the `spdebridge` executable. Returns 0 on success, 2 on
/// configuration errors, 3 on numerical failures (including oracle deviations
/// above the configured tolerance).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spdebridge

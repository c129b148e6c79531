#pragma once

#include <iosfwd>

namespace bichunter {

/// Entry point of the `bichunter` tool. Returns the process exit status;
/// failures print one `error: <kind>: <message>` line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bichunter

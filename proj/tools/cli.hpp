#pragma once

#include <iosfwd>

namespace slotbench {

/// Entry point of the `slotbench` tool. Returns 0 on success, 1 on usage or config
/// errors, 2 on runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slotbench

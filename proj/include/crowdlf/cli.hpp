#pragma once

namespace crowdlf {

// Entry point shared by the binary and the in-process CLI tests.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
int cli_run(int argc, const char* const* argv);

}  // namespace crowdlf

#pragma once

namespace viscogs::cli {

// Exit codes: 0 pass, 1 usage or configuration error, 2 finding or invariant violation.
int run_cli(int argc, char** argv);

}  // namespace viscogs::cli

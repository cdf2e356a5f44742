#pragma once

namespace fmc {

// Entry point of the `fmc` command line tool. Returns the process exit code:
// 0 on success, 1 on usage or data errors, 2 when a fit hit its iteration
// cap without converging.
int run_cli(int argc, char** argv);

} // namespace fmc

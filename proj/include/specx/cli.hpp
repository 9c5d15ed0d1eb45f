#pragma once

namespace specx::cli {

// Full command-line surface. Returns the process exit status: 0 on success,
// nonzero with a one-line diagnostic on stderr otherwise.
int run(int argc, char** argv);

}  // namespace specx::cli

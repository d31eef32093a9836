// Command-line front end. Subcommands wrap the library modules into
// file-based, seeded, reproducible runs; every run echoes its configuration
// and output hashes into a manifest.
//
// Exit codes: 0 success, 1 hard error, 2 empty-result success.

#pragma once

#include <string>
#include <vector>

namespace protshape::cli {

int run(const std::vector<std::string>& args);  // args excludes the program name
int run(int argc, char** argv);

}  // namespace protshape::cli

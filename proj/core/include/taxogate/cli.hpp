#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace taxogate {

/// Entry point of the command-line tool, minus the process boundary.
/// `args` excludes the program name. Usage:
///   <subcommand> [config-file] [--key=value ...]
/// Returns 0 on success; otherwise writes one diagnostic line to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The subcommand names in the order they appear in the usage text.
const std::vector<std::string>& subcommand_names();

}  // namespace taxogate

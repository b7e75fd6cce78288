#ifndef PMNET_CLI_HPP_
#define PMNET_CLI_HPP_

#include <iosfwd>
#include <set>
#include <string>

#include "pmnet/kvconfig.hpp"

namespace pmnet {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// Every key accepted in a configuration file.
const std::set<std::string>& known_config_keys();
// Throws ConfigError naming the first key not in known_config_keys().
void check_config_keys(const KeyValues& kv, const std::string& source);

// "max_gap" -> "max-gap"
std::string kebab_case(const std::string& key);

// Subcommands: gen-corpus, train, eval, ablate, extract-features, inspect-checkpoint.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pmnet

#endif  // PMNET_CLI_HPP_

#ifndef PMNET_KVCONFIG_HPP_
#define PMNET_KVCONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pmnet {

// Flat key=value settings, iterated in key order.
using KeyValues = std::map<std::string, std::string>;

// Parses "key=value" lines; '#' starts a comment, blank lines are ignored.
// `source` names the input in error messages.
KeyValues parse_key_values(std::istream& in, const std::string& source = "config");
KeyValues read_key_values(const std::string& path);
std::vector<std::string> key_value_lines(const KeyValues& kv);

// Typed accessors. A missing key yields the fallback; a malformed value
// throws ConfigError naming the key.
std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback);
double kv_double(const KeyValues& kv, const std::string& key, double fallback);
std::int64_t kv_int(const KeyValues& kv, const std::string& key, std::int64_t fallback);
std::uint64_t kv_uint(const KeyValues& kv, const std::string& key, std::uint64_t fallback);

// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace pmnet

#endif  // PMNET_KVCONFIG_HPP_

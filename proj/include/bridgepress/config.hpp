#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bridgepress/data.hpp"

namespace bridgepress {

/// Ordered key/value pairs from a UTF-8 `key=value` text. Blank lines and
/// lines starting with '#' are ignored; repeated keys are an error.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(const std::string& text);
ConfigMap read_config(const std::filesystem::path& path);
std::string format_config(const ConfigMap& config);

/// Throws ConfigError naming the first key not in `allowed`.
void reject_unknown(const ConfigMap& config, const std::set<std::string>& allowed,
                    const std::string& context);

double config_double(const std::string& key, const std::string& value);
std::int64_t config_int(const std::string& key, const std::string& value);
std::uint64_t config_uint(const std::string& key, const std::string& value);
bool config_bool(const std::string& key, const std::string& value);
std::vector<double> config_doubles(const std::string& key, const std::string& value);
std::vector<int> config_ints(const std::string& key, const std::string& value);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

ToySpec toy_spec_from(const ConfigMap& config);
ConfigMap to_config(const ToySpec& spec);

}  // namespace bridgepress

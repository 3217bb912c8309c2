#include "bridgepress/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "bridgepress/container.hpp"

namespace bridgepress {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> items(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ConfigMap parse_config(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + " has no '=': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + " has no key");
    if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError("config key '" + key + "' given twice");
    }
  }
  return out;
}

ConfigMap read_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file " + path.string() + " not found");
  return parse_config(read_file(path));
}

std::string format_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += k + "=" + v + "\n";
  return out;
}

void reject_unknown(const ConfigMap& config, const std::set<std::string>& allowed,
                    const std::string& context) {
  for (const auto& [k, v] : config) {
    if (!allowed.count(k)) throw ConfigError("unknown " + context + " key '" + k + "'");
  }
}

double config_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used == value.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": '" + value + "' is not a number");
}

std::int64_t config_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError(key + ": '" + value + "' is not an integer");
  }
  return v;
}

std::uint64_t config_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError(key + ": '" + value + "' is not a non-negative integer");
  }
  return v;
}

bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": '" + value + "' is not a boolean");
}

std::vector<double> config_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : items(value)) out.push_back(config_double(key, item));
  return out;
}

std::vector<int> config_ints(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& item : items(value)) out.push_back(static_cast<int>(config_int(key, item)));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ToySpec toy_spec_from(const ConfigMap& config) {
  reject_unknown(config,
                 {"subjects", "samples_per_subject", "mass_min_kg", "mass_max_kg", "height_min_m",
                  "height_max_m", "taxel_area_m2", "gravity", "camera_height_m",
                  "max_thickness_m", "thickness_kpa", "cover_blur", "depth_rows", "depth_cols",
                  "pressure_rows", "pressure_cols"},
                 "toy spec");
  ToySpec s;
  for (const auto& [k, v] : config) {
    if (k == "subjects") s.subjects = static_cast<int>(config_int(k, v));
    else if (k == "samples_per_subject") s.samples_per_subject = static_cast<int>(config_int(k, v));
    else if (k == "mass_min_kg") s.mass_min_kg = config_double(k, v);
    else if (k == "mass_max_kg") s.mass_max_kg = config_double(k, v);
    else if (k == "height_min_m") s.height_min_m = config_double(k, v);
    else if (k == "height_max_m") s.height_max_m = config_double(k, v);
    else if (k == "taxel_area_m2") s.taxel_area_m2 = config_double(k, v);
    else if (k == "gravity") s.gravity = config_double(k, v);
    else if (k == "camera_height_m") s.camera_height_m = config_double(k, v);
    else if (k == "max_thickness_m") s.max_thickness_m = config_double(k, v);
    else if (k == "thickness_kpa") s.thickness_kpa = config_double(k, v);
    else if (k == "depth_rows") s.depth_rows = config_int(k, v);
    else if (k == "depth_cols") s.depth_cols = config_int(k, v);
    else if (k == "pressure_rows") s.pressure_rows = config_int(k, v);
    else if (k == "pressure_cols") s.pressure_cols = config_int(k, v);
    else if (k == "cover_blur") {
      const auto blur = config_doubles(k, v);
      if (blur.size() != 3) throw ConfigError("cover_blur needs three values");
      s.cover_blur = {blur[0], blur[1], blur[2]};
    }
  }
  s.validate();
  return s;
}

ConfigMap to_config(const ToySpec& s) {
  return {
      {"subjects", std::to_string(s.subjects)},
      {"samples_per_subject", std::to_string(s.samples_per_subject)},
      {"mass_min_kg", format_double(s.mass_min_kg)},
      {"mass_max_kg", format_double(s.mass_max_kg)},
      {"height_min_m", format_double(s.height_min_m)},
      {"height_max_m", format_double(s.height_max_m)},
      {"taxel_area_m2", format_double(s.taxel_area_m2)},
      {"gravity", format_double(s.gravity)},
      {"camera_height_m", format_double(s.camera_height_m)},
      {"max_thickness_m", format_double(s.max_thickness_m)},
      {"thickness_kpa", format_double(s.thickness_kpa)},
      {"cover_blur", format_double(s.cover_blur[0]) + "," + format_double(s.cover_blur[1]) + "," +
                         format_double(s.cover_blur[2])},
      {"depth_rows", std::to_string(s.depth_rows)},
      {"depth_cols", std::to_string(s.depth_cols)},
      {"pressure_rows", std::to_string(s.pressure_rows)},
      {"pressure_cols", std::to_string(s.pressure_cols)},
  };
}

}  // namespace bridgepress

#include "seqgp/config.hpp"

#include "seqgp/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace seqgp {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> tokens(const std::string& value) {
  std::istringstream in(value);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return format_g17(v.get<double>());
  throw ConfigError("config json: unsupported value type");
}

}  // namespace

bool Config::has(const std::string& section, const std::string& key) const {
  const auto sec = sections_.find(section);
  return sec != sections_.end() && sec->second.count(key) > 0;
}

std::string Config::get_str(const std::string& section, const std::string& key) const {
  const auto sec = sections_.find(section);
  if (sec != sections_.end()) {
    const auto it = sec->second.find(key);
    if (it != sec->second.end()) return it->second;
  }
  throw ConfigError("config: missing [" + section + "] " + key);
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  return has(section, key) ? get_str(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string raw = get_str(section, key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " is not a number: '" + raw + "'");
  }
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

std::int64_t Config::get_int(const std::string& section, const std::string& key) const {
  const std::string raw = get_str(section, key);
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " is not an integer: '" + raw + "'");
  }
}

std::int64_t Config::get_int(const std::string& section, const std::string& key,
                             std::int64_t fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string raw = get_str(section, key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw ConfigError("config: [" + section + "] " + key + " is not a boolean: '" + raw + "'");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : tokens(get_str(section, key))) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("config: [" + section + "] " + key + " has a non-numeric token '" + tok +
                        "'");
    }
  }
  return out;
}

std::vector<std::int64_t> Config::get_ints(const std::string& section,
                                           const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& tok : tokens(get_str(section, key))) {
    try {
      out.push_back(std::stoll(tok));
    } catch (const std::exception&) {
      throw ConfigError("config: [" + section + "] " + key + " has a non-integer token '" + tok +
                        "'");
    }
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

Config parse_config_text(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    config.set(section, key, value);
  }
  return config;
}

Config parse_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config json: top level must be an object");

  Config config;
  for (const auto& [section_key, value] : root.items()) {
    if (value.is_object()) {
      for (const auto& [key, inner] : value.items()) {
        if (inner.is_array()) {
          std::string joined;
          for (const auto& item : inner) {
            if (!joined.empty()) joined += ' ';
            joined += json_scalar_to_string(item);
          }
          config.set(section_key, key, joined);
        } else {
          config.set(section_key, key, json_scalar_to_string(inner));
        }
      }
    } else {
      config.set("", section_key, json_scalar_to_string(value));
    }
  }
  return config;
}

Config parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (path.extension() == ".json" || (first != std::string::npos && text[first] == '{'))
    return parse_config_json(text);
  return parse_config_text(text);
}

std::string serialize_config(const Config& config) {
  std::ostringstream out;
  // The unnamed section first, so a reparse assigns its keys correctly.
  for (const auto& [section, entries] : config.sections()) {
    if (!section.empty()) continue;
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  }
  for (const auto& [section, entries] : config.sections()) {
    if (section.empty()) continue;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
    out << '\n';
  }
  return out.str();
}

}  // namespace seqgp

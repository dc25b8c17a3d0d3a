// Run configuration: flat key-value sections, parsed from the text grammar
// or from JSON. The grammar:
//
//   # comment (also ';')
//   [section]
//   key = value tokens until end of line
//
// Keys before any section header live in the unnamed section "". JSON input
// maps top-level objects to sections; arrays become space-joined tokens.
#pragma once

#include "seqgp/common.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace seqgp {

class Config {
 public:
  bool has(const std::string& section, const std::string& key) const;

  std::string get_str(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
  std::vector<std::int64_t> get_ints(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

  bool operator==(const Config& other) const = default;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

Config parse_config_text(const std::string& text);
Config parse_config_json(const std::string& text);
Config parse_config_file(const std::filesystem::path& path);
std::string serialize_config(const Config& config);

}  // namespace seqgp

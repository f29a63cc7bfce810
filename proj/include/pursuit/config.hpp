#pragma once

#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pursuit {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

// Flat key = value configuration with one level of [section] grouping and
// full-line or trailing # comments.  Section entries address as
// "section.key".  Values cannot contain '#'.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": unterminated section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty() || section.find('.') != std::string::npos)
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": bad section name");
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full))
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": duplicate key '" + full + "'");
      cfg.values_[full] = value;
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("junk");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
    }
  }

  int get_int(const std::string& key, int fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size() || v != static_cast<int>(v))
        throw std::invalid_argument("junk");
      return static_cast<int>(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Keys present in the file that no getter ever asked for; a nonempty
  // result after resolving an experiment means the config was mistyped.
  std::vector<std::string> unknown_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!touched_.count(k)) out.push_back(k);
    return out;
  }

  // Canonical rendering: bare keys first, then sections, everything sorted.
  // Used verbatim as the provenance block embedded in reports.
  std::string dump() const {
    std::ostringstream os;
    std::map<std::string, std::map<std::string, std::string>> grouped;
    for (const auto& [k, v] : values_) {
      const std::size_t dot = k.find('.');
      if (dot == std::string::npos)
        grouped[""][k] = v;
      else
        grouped[k.substr(0, dot)][k.substr(dot + 1)] = v;
    }
    bool first = true;
    for (const auto& [section, entries] : grouped) {
      if (!section.empty()) {
        if (!first) os << "\n";
        os << "[" << section << "]\n";
      }
      for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
      first = false;
    }
    return os.str();
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> touched_;
};

}  // namespace pursuit

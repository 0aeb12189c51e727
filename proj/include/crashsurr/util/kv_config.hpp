#pragma once

// Flat key = value configuration files. '#' starts a comment, blank lines
// are ignored, keys are unique. Values are kept as strings and converted on
// lookup, so unknown keys can be reported by the caller.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crashsurr/error.hpp"

namespace crashsurr::util {

class KvConfig {
 public:
  static KvConfig parse(const std::string& text, const std::string& origin = "<config>") {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos, ErrorKind::kFormat,
              origin + ":" + std::to_string(lineno) + ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      require(!key.empty(), ErrorKind::kFormat, origin + ":" + std::to_string(lineno) + ": empty key");
      require(!cfg.values_.count(key), ErrorKind::kFormat,
              origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
      cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static KvConfig load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::kIo, "cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get(const std::string& key, double fallback) const {
    return has(key) ? number<double>(key) : (used_.insert(key), fallback);
  }

  std::size_t get(const std::string& key, std::size_t fallback) const {
    return has(key) ? number<std::size_t>(key) : (used_.insert(key), fallback);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? number<std::uint64_t>(key) : (used_.insert(key), fallback);
  }

  bool get(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto v = get(key, std::string{});
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::kFormat, "config key " + key + ": expected a boolean, got '" + v + "'");
  }

  // Keys present in the file that no lookup has asked for.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  template <typename T>
  T number(const std::string& key) const {
    const auto v = get(key, std::string{});
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc{} && ptr == v.data() + v.size(), ErrorKind::kFormat,
            "config key " + key + ": cannot parse '" + v + "' as a number");
    return out;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace crashsurr::util

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rfseg/error.hpp"

namespace rfseg {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// key=value lines; '#' starts a comment, blank lines are skipped. Entries
/// keep file order (a later duplicate wins when applied in order).
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& name) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw Error(ErrorCode::InvalidArgument, name + ":" + std::to_string(lineno) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot read config " + path.string());
  return parse_key_values(in, path.string());
}

inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in, "<config>");
}

}  // namespace rfseg

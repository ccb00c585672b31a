// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/config.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace resdiff {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw std::invalid_argument("config key '" + key + "' must be a scalar or a list of scalars");
}

}  // namespace

std::vector<ConfigEntry> parse_config_text(const std::string& text) {
  std::vector<ConfigEntry> out;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    const nlohmann::json& opts = doc.contains("options") ? doc["options"] : doc;
    if (!opts.is_object()) throw std::invalid_argument("config options must be an object");
    for (const auto& [key, value] : opts.items()) {
      if (value.is_null()) continue;
      if (value.is_array()) {
        for (const auto& v : value) out.emplace_back(key, scalar_text(v, key));
      } else {
        out.emplace_back(key, scalar_text(value, key));
      }
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::vector<std::string> config_to_args(const std::vector<ConfigEntry>& entries) {
  std::vector<std::string> args;
  args.reserve(entries.size());
  for (const auto& [k, v] : entries) {
    if (v.empty()) {
      // "--key=" would make the parser take the next token as the value.
      args.push_back("--" + k);
      args.emplace_back();
    } else {
      args.push_back("--" + k + "=" + v);
    }
  }
  return args;
}

std::vector<std::string> expand_config_args(const std::vector<std::string>& args,
                                            std::size_t first_user_arg) {
  std::vector<std::string> user;
  std::vector<std::string> injected;
  for (std::size_t i = first_user_arg; i < args.size(); ++i) {
    const std::string& a = args[i];
    std::string path;
    if (a == "--config") {
      if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file");
      path = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      user.push_back(a);
      continue;
    }
    const auto more = config_to_args(read_config_file(path));
    injected.insert(injected.end(), more.begin(), more.end());
  }
  std::vector<std::string> out(args.begin(),
                               args.begin() + static_cast<std::ptrdiff_t>(std::min(first_user_arg, args.size())));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), user.begin(), user.end());
  return out;
}

}  // namespace resdiff

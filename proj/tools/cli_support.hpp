// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Option bookkeeping shared by the subcommands: every setting is bound to a
// variable and recorded so the effective configuration can be written to
// run.json.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace resdiff::cli {

inline constexpr const char* kVersion = "0.1.0";

class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  CLI::App* app() const { return app_; }

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    record(name, [&var] { return nlohmann::ordered_json(var); });
    return app_->add_option("--" + name, var, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    record(name, [&var] { return nlohmann::ordered_json(var); });
    return app_->add_flag("--" + name, var, help);
  }

  // Not reproducibility-relevant (output location, overwrite policy).
  template <class T>
  CLI::Option* add_unrecorded(const std::string& name, T& var, const std::string& help) {
    return app_->add_option("--" + name, var, help);
  }
  CLI::Option* flag_unrecorded(const std::string& name, bool& var, const std::string& help) {
    return app_->add_flag("--" + name, var, help);
  }

  nlohmann::ordered_json run_json() const {
    nlohmann::ordered_json opts;
    for (const auto& [name, get] : recorded_) opts[name] = get();
    nlohmann::ordered_json doc;
    doc["command"] = app_->get_name();
    doc["version"] = kVersion;
    doc["options"] = opts;
    return doc;
  }

 private:
  void record(const std::string& name, std::function<nlohmann::ordered_json()> get) {
    recorded_.emplace_back(name, std::move(get));
  }

  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<nlohmann::ordered_json()>>> recorded_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline void write_run_json(const std::filesystem::path& dir, const Options& opts) {
  std::filesystem::create_directories(dir);
  write_text(dir / "run.json", opts.run_json().dump(2) + "\n");
}

}  // namespace resdiff::cli

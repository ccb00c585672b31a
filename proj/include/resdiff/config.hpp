// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace resdiff {

// A setting read from a config file; list values appear once per element.
using ConfigEntry = std::pair<std::string, std::string>;

// Parses either flat `key = value` text (blank lines and `#` comments
// ignored) or a JSON document. For JSON, the `options` object is used when
// present (the shape of run.json), otherwise the top-level object; nested
// objects are rejected. Throws std::invalid_argument on malformed input.
std::vector<ConfigEntry> parse_config_text(const std::string& text);
std::vector<ConfigEntry> read_config_file(const std::string& path);

// `--key=value` arguments for the entries, in file order. Empty values
// become the pair `--key`, "".
std::vector<std::string> config_to_args(const std::vector<ConfigEntry>& entries);

// Scans argv for `--config FILE` / `--config=FILE`, removes it and splices
// the file's settings in front of the remaining user arguments, so flags
// given explicitly win. `first_user_arg` is the index after the
// subcommand name.
std::vector<std::string> expand_config_args(const std::vector<std::string>& args,
                                            std::size_t first_user_arg);

}  // namespace resdiff

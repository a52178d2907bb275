// Copyright 2026 The PAD Distillation Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Every key can also be set by name on the command line.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pad/trainer.hpp"

namespace pad {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// "pad_tlocal" or weighted joints "pad_glob:1,pad_slocal:0.5".
LossSpec parseLossSpec(std::string_view text);
std::string formatLossSpec(const LossSpec& spec);

/// Throws ConfigError for unknown keys or malformed values, UnknownVariant
/// for unrecognised loss names.
void applySetting(TrainConfig& cfg, std::string_view key, std::string_view value);
std::string getSetting(const TrainConfig& cfg, std::string_view key);
const std::vector<std::string>& configKeys();

/// Errors are prefixed "<source>:<line>: ".
TrainConfig parseConfig(std::string_view text, const std::string& source = "config", TrainConfig base = {});
TrainConfig loadConfig(const std::filesystem::path& path);

/// Every key with its resolved value; parseConfig(serializeConfig(c)) == c.
std::string serializeConfig(const TrainConfig& cfg);

}  // namespace pad

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

// Command-line front end: train, ablate, inspect and gen-data.

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pad/trainer.hpp"

namespace pad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// args excludes the program name.
int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 12 hex digits identifying a fully resolved configuration.
std::string runId(const TrainConfig& cfg);

/// PAD_OUT_DIR if set, otherwise "runs".
std::filesystem::path defaultOutputRoot();

struct AblationCell {
  std::string name;
  TrainConfig config;
};

/// Prior / span / anchor ablations and the joint-loss combinations.
std::vector<AblationCell> ablationGrid(const TrainConfig& base);

}  // namespace pad::cli

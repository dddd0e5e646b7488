/*
 * Copyright (C) 2026 The phasemix authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace phasemix::cli {

// Files written by one run, in order, plus command-specific manifest entries.
struct Artifacts {
    std::filesystem::path dir;
    std::vector<std::string> files;
    nlohmann::json summary = nlohmann::json::object();
    // set by verify when a property fails
    bool invariant_failed = false;

    void write(const std::string& name, const std::string& content);
};

void run_command(const ExperimentConfig& cfg, Artifacts& out);

} // namespace phasemix::cli

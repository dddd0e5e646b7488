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

#include "phasemix/actionangle.hpp"
#include "phasemix/core.hpp"
#include "phasemix/observables.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phasemix::cli {

enum class Command { snapshot, deviation, bound, rate, actionangle, coulomb, verify };

Command parse_command(const std::string& name);
std::string to_string(Command c);

struct WellSpec {
    std::vector<double> coefficients;
    double h_min = 0.0;
    double h_max = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    int table_points = 256;
};

struct ModelSpec {
    std::string name = "quartic_osc_1st_order";
    ParamTable params;
    std::optional<WellSpec> well;
};

struct AngularSpec {
    std::string kind = "cosine";  // constant, cosine, bump
    double value = 1.0;
    double offset = 1.0;
    double amplitude = 1.0;
    int mode = 1;
    double phase = 0.0;
    double center = 0.0;
    double width = 1.0;
};

struct FieldSpec {
    std::string kind = "default";  // default, bump, plateau
    double amplitude = 1.0;
    // per action dimension; empty means the padded model box
    std::vector<std::pair<double, double>> support;
    double ramp = 1e-3;
    std::vector<AngularSpec> angular;
};

struct DensitySpec {
    double x = 1.0;
    double p = 0.0;
    double sigma = 0.25;
    double radius = 1.0;
};

struct SnapshotSpec {
    std::vector<double> times;
    int nx = 128;
    int np = 128;
    double x_min = -2.0;
    double x_max = 2.0;
    double p_min = -2.0;
    double p_max = 2.0;
    DensitySpec density;
};

struct CoulombSpec {
    std::vector<double> x0;
    DensitySpec density{1.0, 0.0, 0.25, 0.75};
    int modes = 256;
    double amplitude_tol = 1e-11;
    double tail_tol = 1e-8;
};

struct ExperimentConfig {
    Command command = Command::deviation;
    ModelSpec model;
    std::optional<FieldSpec> f0;
    std::optional<FieldSpec> phi;
    std::vector<double> times;
    ExpectationOptions quadrature;
    double window = 0.25;
    SnapshotSpec snapshot;
    CoulombSpec coulomb;
    std::string output = ".";
    std::uint64_t seed = 1;
    nlohmann::json echo;
};

// Parses a JSON document strictly: unknown keys and wrong types are ConfigErrors naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc, Command command);

// Log-spaced grid with the given number of points, or 40 per decade by default.
std::vector<double> time_grid(double t_min, double t_max, int count = 0);

// Objects built from a configuration.
Model build_model(const ExperimentConfig& cfg);
ScalarField build_field(const FieldSpec& spec, const DomainBox& domain, bool is_phi);
ActionAngleChart build_well_chart(const WellSpec& w);

} // namespace phasemix::cli

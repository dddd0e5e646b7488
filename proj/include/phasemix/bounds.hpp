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

#include "phasemix/core.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phasemix {

enum class BoundKind { prop21, prop31, localized };
std::string to_string(BoundKind kind);

// D(t) <= constant / t (prop21, prop31) or D(t) <= constant at time t (localized).
struct MixingBound {
    BoundKind kind = BoundKind::prop21;
    double constant = 0.0;
    std::map<std::string, double> ingredients;
    std::optional<double> epsilon_star;
    std::optional<double> t;
};

// eta_eps(k) = prod_i (1 - chi((k - k_i) / eps)), chi the C^2 cutoff profile (1-D).
struct Cutoff {
    std::vector<double> centers;
    double epsilon = 1.0;

    double chi(double u) const;
    double eta(double k) const;
    double eta_d1(double k) const;
    double eta_d2(double k) const;
    // sorted break points of eta (inner and outer edges around each center)
    std::vector<double> knots() const;
};

Cutoff make_cutoff(const std::vector<double>& centers, double epsilon, const DomainBox& domain);

// eta * phi with the gradient from the product rule.
ScalarField apply_cutoff(const ScalarField& phi, const Cutoff& cut);

MixingBound bound_1d(const Model& model, const ScalarField& phi);
MixingBound bound_multid(const Model& model, const ScalarField& phi);

struct LocalizedOptions {
    int grid_points = 32;
    bool refine = true;
};

MixingBound localized_bound(const Model& model, const ScalarField& phi, double t, const LocalizedOptions& opts = {});

// writes header + rows: kind, t, constant, epsilon_star, ingredient:<name>...
void write_csv(std::ostream& os, const std::vector<MixingBound>& bounds);

} // namespace phasemix

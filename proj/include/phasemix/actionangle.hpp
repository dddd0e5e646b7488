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

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace phasemix {

// A one-dimensional confining potential, H = p^2/2 + V(x).
struct PotentialWell {
    std::function<double(double)> V;
    std::function<double(double)> dV;
    // (V(x) - V(y)) / (x - y), accurate as y -> x. Optional; a Simpson fallback on dV
    // is used for close arguments when absent.
    std::function<double(double, double)> divided;
    double h_min = 0.0;
    double h_max = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    // Filled by validate_well.
    double x_min = 0.0;
    double v_min = 0.0;
};

// Checks the single-minimum condition and dV against differences of V, locates the
// minimum and verifies h_range. Throws NotAWellError or ConfigError.
PotentialWell validate_well(PotentialWell well);

// V(x) = sum_i coeffs[i] x^i with an exact divided difference.
PotentialWell polynomial_well(std::vector<double> coeffs, double h_min, double h_max,
                              double x_lo, double x_hi);
PotentialWell harmonic_well(double h_min = 1e-6, double h_max = 8.0);
// V = x^2/2 + epsilon x^4.
PotentialWell quartic_well(double epsilon, double h_min = 1e-6, double h_max = 8.0);

double divided_difference(const PotentialWell& well, double x, double y);

struct TurningPoints {
    double x_minus = 0.0;
    double x_plus = 0.0;
};

TurningPoints turning_points(const PotentialWell& well, double h);

// One closed orbit, parametrized by x = c + r sin(theta), theta in [-pi/2, pi/2].
struct Orbit {
    double h = 0.0;
    double x_minus = 0.0;
    double x_plus = 0.0;
    double c = 0.0;
    double r = 0.0;
    double period = 0.0;
    // Panels per half orbit at which the period quadrature converged.
    int panels = 1;
};

Orbit make_orbit(const PotentialWell& well, double h);

// dt/dtheta along the orbit; smooth on the closed interval.
double orbit_time_density(const PotentialWell& well, const Orbit& orb, double theta);
// |p| at x = c + r sin(theta).
double orbit_momentum(const PotentialWell& well, const Orbit& orb, double theta);
// Time from the left turning point to theta on the upper branch.
double travel_time(const PotentialWell& well, const Orbit& orb, double theta);
// theta with travel_time = tau, tau in [0, T/2].
double theta_of_time(const PotentialWell& well, const Orbit& orb, double tau);

double period(const PotentialWell& well, double h);
// I = (1/2pi) * enclosed area.
double action(const PotentialWell& well, double h);

struct ActionAngleChart {
    PotentialWell well;
    std::vector<double> h;
    std::vector<double> I;
    std::vector<double> T;
    FrequencyMap omega;
    int n_table_points = 0;

    double action_of_h(double energy) const;
    double h_of_action(double k) const;
    double period(double energy) const;
    double frequency(double k) const;
    DomainBox action_box() const { return omega.domain; }
};

// Tabulates (h, I, T) on a uniform grid over h_range (n >= 64). Throws InvariantFailure
// if the action table is not strictly increasing.
ActionAngleChart build_chart(const PotentialWell& well, int n_table_points, double padding = 0.0);

struct PhasePoint {
    double x = 0.0;
    double p = 0.0;
};

// q = 0 is the left turning point, p >= 0 on q in [0, pi].
PhasePoint to_physical(const ActionAngleChart& chart, double q, double k);

struct AnglePoint {
    double q = 0.0;
    double k = 0.0;
};

AnglePoint from_physical(const ActionAngleChart& chart, double x, double p);

double hamiltonian(const PotentialWell& well, double x, double p);

// Columns h, I, T, omega.
void write_csv(std::ostream& os, const ActionAngleChart& chart);

} // namespace phasemix

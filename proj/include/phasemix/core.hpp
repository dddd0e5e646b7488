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

#include "phasemix/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace phasemix {

// Axis-aligned open box K of action values.
struct DomainBox {
    int d = 0;
    Vec lo;
    Vec hi;
    // Margin inside which compactly supported fields must vanish.
    double padding = 0.0;

    DomainBox() = default;
    DomainBox(Vec lo, Vec hi, double padding = 0.0);
    static DomainBox interval(double lo, double hi, double padding = 0.0);
    static DomainBox cube(int d, double lo, double hi, double padding = 0.0);

    bool contains(const Vec& k) const;
    Vec width() const { return hi - lo; }
    double volume() const;
    // The box shrunk by the padding on every side.
    DomainBox inner() const;
    // Intersection with another box; empty when the boxes do not overlap.
    std::optional<DomainBox> intersect(const DomainBox& other) const;
    bool contains_box(const DomainBox& other, double slack = 1e-12) const;
};

enum class Degeneracy {
    none,       // det D omega != 0 everywhere
    isolated,   // vanishing only at the listed degenerate points (1-D)
    everywhere  // D omega identically singular (e.g. isochronous)
};

// The frequency map omega: K -> R^d with derivatives.
// jac(k)(j, l) = d omega_l / d k_j; hess(k)[l](i, j) = d^2 omega_l / dk_i dk_j.
struct FrequencyMap {
    DomainBox domain;
    std::function<Vec(const Vec&)> omega;
    std::function<Mat(const Vec&)> jac;
    std::function<std::vector<Mat>(const Vec&)> hess;
    std::vector<Vec> degenerate_points;
    Degeneracy degeneracy = Degeneracy::none;
    // omega_i depends on k_i alone
    bool decoupled = false;

    int dim() const { return domain.d; }
};

// omega'(k) for one-dimensional maps.
double omega_prime(const FrequencyMap& freq, double k);
// omega''(k) for one-dimensional maps.
double omega_second(const FrequencyMap& freq, double k);

// A C^1 function of a single action coordinate, supported on [lo, hi].
struct Profile1D {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double lo = 0.0;
    double hi = 0.0;
    // Points where the smoothness class changes; piecewise quadrature splits here.
    std::vector<double> knots;
    // False for profiles that do not vanish at their ends (constant in k).
    bool compact = true;
};

Profile1D bump_profile(double lo, double hi);
// Flat top of height one with C^2 smoothstep ramps of width `ramp` at both ends.
Profile1D plateau_profile(double lo, double hi, double ramp);
Profile1D constant_profile(double lo, double hi);
// Pointwise product with a C^1 factor; `extra_knots` are the factor's breakpoints.
Profile1D multiply(const Profile1D& p, std::function<double(double)> factor,
                   std::function<double(double)> factor_derivative,
                   const std::vector<double>& extra_knots);

// A 2pi-periodic function of one angle and its cached integrals over [0, 2pi).
struct Angular1D {
    std::function<double(double)> value;
    double integral = 0.0;
    double abs_integral = 0.0;
    double sup_abs = 0.0;
    // kinks in [0, 2pi), empty when smooth
    std::vector<double> knots;
};

Angular1D make_angular(std::function<double(double)> value);
Angular1D angular_constant(double c = 1.0);
// offset + amplitude * cos(mode * q + phase)
Angular1D angular_cosine(double offset, double amplitude, int mode = 1, double phase = 0.0);
// C^2 bump of half-width `width` centered at `center` (width <= pi).
Angular1D angular_bump(double center, double width);
// a0 + sum_m (a_m cos(m q) + b_m sin(m q)), coefficients indexed from m = 1.
Angular1D angular_series(double a0, const std::vector<double>& a, const std::vector<double>& b);

// Amplitude times a product of 1-D action profiles times a product of 1-D angular factors.
struct SeparableParts {
    double amplitude = 1.0;
    std::vector<Profile1D> profiles;
    std::vector<Angular1D> angulars;

    double profile(const Vec& k) const;
    Vec profile_grad(const Vec& k) const;
    double angular(const Vec& q) const;
    double angular_integral() const;
    double angular_abs_integral() const;
    double angular_sup() const;
};

// A C^1 function on T^d x K with analytic k-gradient and declared support box.
struct ScalarField {
    DomainBox domain;
    DomainBox support;
    std::function<double(const Vec& q, const Vec& k)> value;
    std::function<Vec(const Vec& q, const Vec& k)> grad_k;
    bool nonnegative = false;
    // Per action dimension, breakpoints of the k-dependence (inside the support).
    std::vector<std::vector<double>> knots;
    // Non-null when the field factors as amplitude * profile(k) * angular(q).
    std::shared_ptr<const SeparableParts> separable;

    int dim() const { return domain.d; }
    bool is_separable() const { return separable != nullptr; }
};

ScalarField make_separable_field(const DomainBox& domain, SeparableParts parts);
ScalarField make_general_field(const DomainBox& domain, const DomainBox& support,
                               std::function<double(const Vec&, const Vec&)> value,
                               std::function<Vec(const Vec&, const Vec&)> grad_k,
                               bool nonnegative, std::vector<std::vector<double>> knots = {});
// lambda * field.
ScalarField scaled(const ScalarField& field, double lambda);

// Default initial datum: plateau in k over the middle half of the padded box,
// times (1 + cos q_1).
ScalarField default_f0(const DomainBox& domain, double ramp = 1e-3);
// Default test function: (1 - u^2)^3 bump over the padded box, times (1 + cos q_1).
ScalarField default_phi(const DomainBox& domain);

struct Model {
    FrequencyMap freq;
    ScalarField f0;
    std::string label;
};

using ParamTable = std::map<std::string, double>;

// Catalog: free_stream, isochronous, quartic_osc_1st_order, quadratic_degenerate,
// product_2d. Unknown names or parameter keys raise ConfigError.
Model make_builtin_model(const std::string& name, const ParamTable& params = {});
std::vector<std::string> builtin_model_names();
FrequencyMap make_builtin_frequency(const std::string& name, const ParamTable& params);
DomainBox builtin_domain(const std::string& name, const ParamTable& params);

struct NondegeneracyReport {
    double min_abs_det = 0.0;
    Vec argmin;
    bool degenerate = false;
};

// Minimum of |det D omega| on a uniform probe grid (probes points per dimension)
// over `box` (default: the padded domain). Flagged degenerate below 1e-12.
NondegeneracyReport check_nondegeneracy(const FrequencyMap& freq, int probes,
                                        std::optional<DomainBox> box = std::nullopt);

// Largest relative deviation between jac and central differences of omega
// (step 1e-5) over `points` random probes.
double jacobian_fd_error(const FrequencyMap& freq, int points, std::uint64_t seed);
// Largest deviation between grad_k and central differences of value, relative to
// the largest gradient seen on the probes.
double gradient_fd_error(const ScalarField& field, int points, std::uint64_t seed);

} // namespace phasemix

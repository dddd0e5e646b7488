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
#include "phasemix/quadrature.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace phasemix {

// Fourier coefficients of a field at one action value, for |m_i| <= m_max.
// Entries are stored with m_0 varying fastest.
struct FourierSlice {
    int d = 1;
    int m_max = 0;
    std::vector<Complex> coeffs;

    int side() const { return 2 * m_max + 1; }
    std::size_t index(const std::vector<int>& m) const;
    Complex operator()(const std::vector<int>& m) const { return coeffs[index(m)]; }
    // the mode vector of a linear index
    std::vector<int> mode(std::size_t index) const;
};

// (2pi)^-d int field(q, k) exp(-i m.q) dq by a uniform grid_size^d transform.
FourierSlice fourier_coefficients(const ScalarField& field, const Vec& k, int m_max, int grid_size = 256);

// Fourier representation of a field on demand; one slice per action value.
class FourierTable {
public:
    FourierTable(ScalarField field, int m_max, int grid_size = 256);

    int m_max() const { return m_max_; }
    int grid_size() const { return grid_size_; }
    const ScalarField& field() const { return field_; }
    FourierSlice at(const Vec& k) const;

private:
    ScalarField field_;
    int m_max_;
    int grid_size_;
};

struct ExpectationOptions {
    double tol = 1e-8;
    int grid_size = 256;
    double c_osc = 4.0;
    double t_direct_max = 200.0;
    int order = 10;
    // starting q nodes per angle dimension for the direct method; doubled until settled
    int direct_q_nodes = 24;
};

// int_K bar f0(k) int_T phi(q, k) dq dk, to 1e-10 relative (the error never reports less).
Estimate mixing_limit(const Model& model, const ScalarField& phi, const ExpectationOptions& opts = {});

// Tensor quadrature of f(t) phi over T^d x K with oscillation-scaled k panels.
Estimate expectation_direct(const Model& model, const ScalarField& phi, double t,
                            const ExpectationOptions& opts = {});

// Mode-sum evaluation (2pi)^d sum_m int f0^(m, k) conj(phi^(m, k)) exp(-i m.omega t) dk.
Estimate expectation_spectral(const Model& model, const ScalarField& phi, double t,
                              const ExpectationOptions& opts = {});

// Which modes the spectral method keeps and the neglected tail.
struct ModeSelection {
    int m_max = 0;
    double tail = 0.0;
};
ModeSelection select_modes(const Model& model, const ScalarField& phi, const ExpectationOptions& opts = {});

// Only the m = 0 term of the spectral sum.
Estimate spectral_mean_term(const Model& model, const ScalarField& phi, const ExpectationOptions& opts = {});

enum class Method { direct, spectral };
std::string to_string(Method m);

struct DeviationSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> errors;
    double limit = 0.0;
    Method method = Method::spectral;

    std::size_t size() const { return times.size(); }
};

struct DeviationOptions {
    ExpectationOptions expectation;
    bool cross_check = true;
};

// D(t_i) = |I(t_i) - I_inf| by the spectral method, cross-checked against the direct
// method for t_i <= t_direct_max; a disagreement beyond the error bars throws.
DeviationSeries deviation_series(const Model& model, const ScalarField& phi, const std::vector<double>& times,
                                 const DeviationOptions& opts = {});

struct EnvelopeFit {
    double slope = 0.0;
    double std_error = 0.0;
    std::size_t points = 0;
};

// Least-squares slope of log D_env against log t; D_env is the maximum of D over a
// centered window of `window` decades.
EnvelopeFit fit_envelope_exponent(const DeviationSeries& series, double window = 0.25);
EnvelopeFit fit_envelope_exponent(const std::vector<double>& times, const std::vector<double>& values,
                                  double window = 0.25);

// n points log-spaced in [t_min, t_max], endpoints included.
std::vector<double> log_spaced(double t_min, double t_max, int n);

void write_csv(std::ostream& os, const DeviationSeries& series);

} // namespace phasemix

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
#include "phasemix/observables.hpp"
#include "phasemix/quadrature.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace phasemix {

// Fundamental solution of -Laplace with its pole at x0.
// d = 1: (x - x0) 1{x <= x0} + max(0, x0), which vanishes at x = 0.
// d = 2: -ln|x - x0| / (2 pi).  d = 3: |x - x0|^{-1} / (4 pi).
struct CoulombKernel {
    int d = 1;
    Vec x0;
};

double kernel_value(const CoulombKernel& kern, const Vec& x);
// d = 1 shorthand.
double kernel_value_1d(double x0, double x);

// A circle in the (x, p) plane.
struct PhaseCircle {
    double x = 0.0;
    double p = 0.0;
    double radius = 0.0;
};

// A density on the physical phase plane together with its action-angle form f0 = F0 o N.
struct PhysicalDensity {
    std::shared_ptr<const ActionAngleChart> chart;
    ScalarField f0;
    std::function<double(double, double)> F0;
    // Curves where F0 loses smoothness; the last entry is the support boundary when
    // the support is a disk.
    std::vector<PhaseCircle> kinks;
    // Energy range of the support.
    double h_lo = 0.0;
    double h_hi = 0.0;
    // Energies at which an orbit is tangent to a kink circle.
    std::vector<double> h_knots;
    std::string label;
};

// exp(-r^2 / (2 sigma^2)) * cutoff(r / radius), r the distance to (x, p).
PhysicalDensity gaussian_density(std::shared_ptr<const ActionAngleChart> chart, double x, double p,
                                 double sigma, double radius, std::string label = "gaussian");
// F0 = psi(H) for psi supported on [h_lo, h_hi]; independent of the angle.
PhysicalDensity energy_density(std::shared_ptr<const ActionAngleChart> chart,
                               std::function<double(double)> psi, double h_lo, double h_hi,
                               std::string label = "energy");

struct CoulombOptions {
    int modes = 256;
    // Interpolation tolerance for the angular amplitudes on the coarse action grid.
    double amplitude_tol = 1e-11;
    // Largest accepted estimate of the truncated mode tail.
    double tail_tol = 1e-8;
    double c_osc = 2.0;
    // Maximum theta panel length on one half orbit.
    double theta_panel = pi / 48.0;
};

enum class CoulombScheme {
    // exact integration of a Legendre expansion in omega against the phase
    legendre_bessel,
    // Gauss-Legendre sub-panels resolving every oscillation
    fine_quadrature
};

// Potentials V(t, x0) for a fixed set of field points. The potential splits into the
// angle-averaged part (t-independent) and an oscillatory remainder.
class CoulombEvaluator {
public:
    CoulombEvaluator(const PhysicalDensity& dens, const FrequencyMap& freq, std::vector<double> x0,
                     const CoulombOptions& opts = {});

    const std::vector<double>& x0() const { return x0_; }
    // Potential of the angle-averaged density.
    const std::vector<Estimate>& limit() const { return limit_; }
    // V(t, x0) - limit(x0), signed.
    std::vector<Estimate> deviation(double t,
                                    CoulombScheme scheme = CoulombScheme::legendre_bessel) const;
    std::vector<Estimate> potential(double t) const;

    std::size_t coarse_panels() const { return panels_.size(); }
    int modes() const { return modes_; }
    double tail_estimate() const { return tail_; }

private:
    struct Panel {
        double a = 0.0;
        double b = 0.0;
        std::vector<double> omega;
        // amp[(j * n_x0 + x) * modes + (m - 1)] for node j, field point x, mode m >= 1
        std::vector<Complex> amp;
        int top_mode = 0;
        // omega monotone on the panel: Legendre coefficients of amp / omega' in omega,
        // leg[((m - 1) * n_x0 + x) * order + n]
        bool monotone = false;
        double u_mid = 0.0;
        double u_half = 0.0;
        std::vector<Complex> leg;
    };

    void expand_in_omega(Panel& pan);
    void fine_panel(const Panel& pan, double t, std::vector<Complex>& lev1, std::vector<Complex>& lev2,
                    std::vector<double>& abs_sum) const;

    std::vector<double> x0_;
    std::vector<Estimate> limit_;
    std::vector<Panel> panels_;
    std::vector<double> static_err_;
    int modes_ = 0;
    double c_osc_ = 2.0;
    double tail_ = 0.0;
};

double coulomb_potential(const PhysicalDensity& dens, const FrequencyMap& freq, double t, double x0);

struct CoulombSeries {
    DeviationSeries series;
    std::vector<double> x0;
    // per_x0[i][j]: signed deviation at times[i], x0[j]
    std::vector<std::vector<double>> per_x0;
};

// sup over x0_grid of |V(t, x0) - V_limit(x0)|, limit = 0 convention.
CoulombSeries coulomb_deviation(const PhysicalDensity& dens, const FrequencyMap& freq,
                                const std::vector<double>& times, const std::vector<double>& x0_grid,
                                const CoulombOptions& opts = {});

// Columns t, sup_dev, dev_x0=<value>...
void write_csv(std::ostream& os, const CoulombSeries& s);

} // namespace phasemix

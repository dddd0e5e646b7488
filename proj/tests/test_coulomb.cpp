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
#include "phasemix/errors.hpp"
#include "phasemix/coulomb.hpp"
#include "phasemix/quadrature.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace phasemix;

namespace {

// potential at x0 of a unit charge sitting at s
double unit_charge(double s, double x0)
{
    return (x0 <= s ? x0 - s : 0.0) + std::max(0.0, s);
}

template <typename F>
double gl_breaks(F&& f, std::vector<double> br, int per_panel, int order = 16)
{
    std::sort(br.begin(), br.end());
    const auto& gl = gauss_legendre(order);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        const double len = (br[i + 1] - br[i]) / per_panel;
        if (!(len > 0)) {
            continue;
        }
        for (int p = 0; p < per_panel; ++p) {
            const double a = br[i] + p * len;
            for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
                s += 0.5 * len * gl.weights[j] * f(a + 0.5 * len * (1.0 + gl.nodes[j]));
            }
        }
    }
    return s;
}

constexpr double cx = 1.0;
constexpr double sigma = 0.25;
constexpr double radius = 0.75;

// p-marginal of F0 at fixed x, split at the kink circles
double marginal0(const PhysicalDensity& d, double x)
{
    const double dx = x - cx;
    if (std::abs(dx) >= radius) {
        return 0.0;
    }
    const double pm = std::sqrt(radius * radius - dx * dx);
    std::vector<double> br = {-pm, pm};
    if (std::abs(dx) < 0.5 * radius) {
        const double pi_ = std::sqrt(0.25 * radius * radius - dx * dx);
        br.push_back(-pi_);
        br.push_back(pi_);
    }
    return gl_breaks([&](double p) { return d.F0(x, p); }, br, 8);
}

struct Setup {
    std::shared_ptr<const ActionAngleChart> chart;
    PhysicalDensity dens;
    std::vector<double> x0;
    std::unique_ptr<CoulombEvaluator> ev;
};

const Setup& setup()
{
    static const Setup s = [] {
        Setup o;
        o.chart = std::make_shared<const ActionAngleChart>(build_chart(quartic_well(0.3, 0.01, 5.0), 256));
        o.dens = gaussian_density(o.chart, cx, 0.0, sigma, radius);
        o.x0 = {-1.5, -0.5, 0.0, 0.49, 0.5, 0.51, 0.99, 1.0, 1.01, 1.49, 1.5, 1.51, 2.0};
        o.ev = std::make_unique<CoulombEvaluator>(o.dens, o.chart->omega, o.x0);
        return o;
    }();
    return s;
}

} // namespace

TEST(Kernel, OneDimensional)
{
    EXPECT_EQ(kernel_value_1d(1.0, 0.0), 0.0);
    EXPECT_EQ(kernel_value_1d(1.0, 2.0), 1.0);
    EXPECT_EQ(kernel_value_1d(-0.7, 0.0), 0.0);
    for (double x0 : {-1.0, 0.3, 2.0}) {
        EXPECT_EQ(kernel_value(CoulombKernel{1, vec1(x0)}, vec1(0.0)), 0.0);
        const double h = 1e-3;
        // linear away from the pole
        for (double x : {x0 - 0.5, x0 + 0.5}) {
            const double d2 = kernel_value_1d(x0, x + h) - 2 * kernel_value_1d(x0, x) + kernel_value_1d(x0, x - h);
            EXPECT_NEAR(d2, 0.0, 1e-12);
        }
        const double left = (kernel_value_1d(x0, x0) - kernel_value_1d(x0, x0 - h)) / h;
        const double right = (kernel_value_1d(x0, x0 + h) - kernel_value_1d(x0, x0)) / h;
        EXPECT_NEAR(left - right, 1.0, 1e-12);
    }
}

TEST(Kernel, HigherDimensionsAgainstMollifier)
{
    Vec c3(3);
    c3 << 0.1, -0.2, 0.3;
    Vec x3 = c3;
    x3[0] += 1.0;
    EXPECT_NEAR(kernel_value(CoulombKernel{3, c3}, x3), 1.0 / (4.0 * pi), 1e-15);
    EXPECT_THROW(kernel_value(CoulombKernel{3, c3}, c3), DomainError);
    // pairing with -Laplace of a radial mollifier psi returns psi(0)
    auto psi = [](double r) { return r >= 1.0 ? 0.0 : std::pow(1.0 - r * r, 4); };
    const double h = 1e-4;
    auto lap = [&](double r, int d) {
        const double d2 = (psi(r + h) - 2 * psi(r) + psi(r - h)) / (h * h);
        const double d1 = (psi(r + h) - psi(r - h)) / (2 * h);
        return d2 + (d - 1) * d1 / r;
    };
    for (int d : {2, 3}) {
        Vec c = Vec::Zero(d);
        const double pairing = gl_breaks(
            [&](double r) {
                Vec x = Vec::Zero(d);
                x[0] = r;
                const double shell = d == 2 ? two_pi * r : 4.0 * pi * r * r;
                return kernel_value(CoulombKernel{d, c}, x) * (-lap(r, d)) * shell;
            },
            {0.0, 1.0}, 64);
        EXPECT_NEAR(pairing, psi(0.0), 1e-6) << d;
    }
}

TEST(Coulomb, InitialPotentialMatchesPhysicalQuadrature)
{
    const auto& s = setup();
    const auto v = s.ev->potential(0.0);
    for (std::size_t i = 0; i < s.x0.size(); ++i) {
        const double x0 = s.x0[i];
        std::vector<double> br = {cx - radius, cx - 0.5 * radius, cx + 0.5 * radius, cx + radius};
        if (x0 > cx - radius && x0 < cx + radius) {
            br.push_back(x0);
        }
        const double ref = gl_breaks([&](double x) { return marginal0(s.dens, x) * unit_charge(x, x0); }, br, 8);
        EXPECT_NEAR(v[i].value, ref, 1e-6) << x0;
        EXPECT_LE(v[i].err, 1e-6);
    }
}

TEST(Coulomb, ZeroAtOrigin)
{
    const auto& s = setup();
    for (double t : {0.0, 3.0, 10.0, 77.0, 500.0}) {
        EXPECT_EQ(s.ev->potential(t)[2].value, 0.0);
        EXPECT_EQ(s.ev->deviation(t)[2].value, 0.0);
    }
}

TEST(Coulomb, PoissonEquation)
{
    const auto& s = setup();
    const auto& chart = *s.chart;
    const auto& f0 = s.dens.f0;
    const double h = 0.02;
    const std::vector<double> centers = {0.5, 1.0, 1.5};
    std::vector<double> pts;
    for (double c : centers) {
        for (int j = -2; j <= 2; ++j) {
            pts.push_back(c + j * h);
        }
    }
    const CoulombEvaluator ev(s.dens, chart.omega, pts);
    for (double t : {0.0, 10.0}) {
        const auto v = ev.potential(t);
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const double x0 = centers[c];
            const auto w = [&](int j) { return v[5 * c + std::size_t(2 + j)].value; };
            // fourth order stencil
            const double d2 = (-w(2) + 16 * w(1) - 30 * w(0) + 16 * w(-1) - w(-2)) / (12 * h * h);
            const double pmax = std::sqrt(2.0 * (s.dens.h_hi - chart.well.V(x0)));
            const double rho = gl_breaks(
                [&](double p) {
                    const double e = hamiltonian(chart.well, x0, p);
                    if (e <= s.dens.h_lo || e >= s.dens.h_hi) {
                        return 0.0;
                    }
                    const auto a = from_physical(chart, x0, p);
                    const double q = wrap_angle(a.q - chart.frequency(a.k) * t);
                    return f0.value(vec1(q), vec1(a.k));
                },
                {-pmax, pmax}, 400, 10);
            EXPECT_NEAR(-d2, rho, 1e-3 * std::max(rho, 0.01)) << "t=" << t << " x0=" << x0;
        }
    }
}

TEST(Coulomb, SchemesAgree)
{
    const auto& s = setup();
    for (double t : {1.0, 10.0, 120.0, 500.0}) {
        const auto a = s.ev->deviation(t, CoulombScheme::legendre_bessel);
        const auto b = s.ev->deviation(t, CoulombScheme::fine_quadrature);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_LE(std::abs(a[i].value - b[i].value), a[i].err + b[i].err) << t;
        }
    }
}

TEST(Coulomb, LimitIsTimeAverage)
{
    // the oscillatory part averages out over a long window
    const auto& s = setup();
    const int n = 400;
    std::vector<double> avg(s.x0.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto d = s.ev->deviation(200.0 + i * 0.5);
        for (std::size_t x = 0; x < d.size(); ++x) {
            avg[x] += d[x].value / n;
        }
    }
    for (std::size_t x = 0; x < avg.size(); ++x) {
        EXPECT_LT(std::abs(avg[x]), 1e-7);
    }
}

TEST(Coulomb, EnergyDensityDoesNotMix)
{
    const auto& s = setup();
    auto psi = [](double h) {
        const double u = (h - 0.3) / 0.2;
        return std::abs(u) >= 1.0 ? 0.0 : std::pow(1.0 - u * u, 3);
    };
    const auto d = energy_density(s.chart, psi, 0.1, 0.5);
    const auto series = coulomb_deviation(d, s.chart->omega, {1.0, 10.0, 100.0}, {-1.0, 0.0, 0.5});
    for (std::size_t i = 0; i < series.series.size(); ++i) {
        EXPECT_LE(series.series.values[i], 1e-10 + series.series.errors[i]);
    }
}

TEST(Coulomb, Preconditions)
{
    const auto& s = setup();
    const auto harm = std::make_shared<const ActionAngleChart>(build_chart(harmonic_well(0.01, 5.0), 128));
    const auto d = gaussian_density(harm, cx, 0.0, sigma, radius);
    EXPECT_THROW(coulomb_deviation(d, harm->omega, {1.0}, {0.5}), DegeneracyError);
    EXPECT_THROW(gaussian_density(s.chart, 0.5, 0.0, sigma, radius), ConfigError);
    EXPECT_THROW(gaussian_density(s.chart, 2.5, 0.0, sigma, radius), ConfigError);
    EXPECT_THROW(energy_density(s.chart, [](double) { return 1.0; }, 0.001, 1.0), ConfigError);
}

TEST(Coulomb, ZeroDensity)
{
    const auto& s = setup();
    const auto d = energy_density(s.chart, [](double) { return 0.0; }, 0.1, 0.5);
    EXPECT_EQ(coulomb_potential(d, s.chart->omega, 5.0, 0.7), 0.0);
}

TEST(Coulomb, CsvLayout)
{
    CoulombSeries c;
    c.x0 = {0.0, 0.5};
    c.series.times = {1.0};
    c.series.values = {0.25};
    c.per_x0 = {{0.0, -0.25}};
    std::ostringstream os;
    write_csv(os, c);
    EXPECT_EQ(os.str(), "t,sup_dev,dev_x0=0,dev_x0=0.5\n1,0.25,0,-0.25\n");
}

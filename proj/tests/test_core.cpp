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
#include "phasemix/actionangle.hpp"
#include "phasemix/core.hpp"
#include "phasemix/quadrature.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace phasemix;

namespace {

double orbit_average_x4(double I)
{
    // x = sqrt(2I) sin theta, averaged over one revolution
    const auto& gl = gauss_legendre(32);
    double s = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double th = pi * (1.0 + gl.nodes[i]);
        const double x = std::sqrt(2.0 * I) * std::sin(th);
        s += pi * gl.weights[i] * std::pow(x, 4);
    }
    return s / two_pi;
}

} // namespace

TEST(Catalog, QuarticFirstOrderFrequency)
{
    const auto m = make_builtin_model("quartic_osc_1st_order", {{"epsilon", 0.3}, {"hi", 3.0}});
    EXPECT_NEAR(m.freq.omega(vec1(1.0))[0], 1.9, 1e-15);
    // averaged Hamiltonian I + eps <x^4>, differentiated in I
    const double eps = 0.3;
    for (double I : {0.1, 0.5, 1.0, 2.0}) {
        EXPECT_NEAR(orbit_average_x4(I), 1.5 * I * I, 1e-13);
        const double h = 1e-4;
        const double hbar_p = (I + h) + eps * orbit_average_x4(I + h);
        const double hbar_m = (I - h) + eps * orbit_average_x4(I - h);
        EXPECT_NEAR((hbar_p - hbar_m) / (2 * h), m.freq.omega(vec1(I))[0], 1e-8);
    }
}

TEST(Catalog, QuarticAgainstFullHamiltonianSmallEpsilon)
{
    const double eps = 0.01;
    const auto m = make_builtin_model("quartic_osc_1st_order", {{"epsilon", eps}});
    const auto chart = build_chart(quartic_well(eps, 1e-3, 0.5), 128);
    for (double h : {0.005, 0.05, 0.2}) {
        const double I = chart.action_of_h(h);
        const double full = two_pi / period(chart.well, h);
        const double first = m.freq.omega(vec1(I))[0];
        EXPECT_LT(std::abs(full - first) / full, 0.02) << "h=" << h;
    }
}

TEST(Catalog, TrivialJacobians)
{
    const auto iso = make_builtin_model("isochronous", {{"omega0", 1.0}});
    const auto fs = make_builtin_model("free_stream");
    for (double k : {0.3, 1.0, 2.5}) {
        EXPECT_EQ(iso.freq.jac(vec1(k))(0, 0), 0.0);
        EXPECT_EQ(fs.freq.jac(vec1(k))(0, 0), 1.0);
    }
    EXPECT_EQ(iso.freq.degeneracy, Degeneracy::everywhere);
    const auto p2 = make_builtin_model("product_2d");
    EXPECT_EQ(p2.freq.jac(vec2(0.7, 1.2)).determinant(), 1.0);
}

TEST(Catalog, Errors)
{
    EXPECT_THROW(make_builtin_model("no_such_model"), ConfigError);
    EXPECT_THROW(make_builtin_model("quartic_osc_1st_order", {{"epsilon", -0.1}}), ConfigError);
    EXPECT_THROW(make_builtin_model("free_stream", {{"epsilom", 0.1}}), ConfigError);
    EXPECT_THROW(make_builtin_model("quadratic_degenerate", {{"kstar", 10.0}}), ConfigError);
}

TEST(Catalog, JacobianMatchesFiniteDifferences)
{
    for (const auto& name : builtin_model_names()) {
        const auto m = make_builtin_model(name);
        EXPECT_LE(jacobian_fd_error(m.freq, 100, 7), 1e-6) << name;
    }
}

TEST(Catalog, DefaultFieldsGradientAndPeriodicity)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& name : builtin_model_names()) {
        const auto m = make_builtin_model(name);
        const auto phi = default_phi(m.freq.domain);
        EXPECT_LE(gradient_fd_error(m.f0, 100, 3), 1e-6) << name;
        EXPECT_LE(gradient_fd_error(phi, 100, 4), 1e-6) << name;
        const int d = m.freq.dim();
        for (int p = 0; p < 200; ++p) {
            Vec q(d);
            Vec k(d);
            for (int i = 0; i < d; ++i) {
                q[i] = two_pi * u(rng);
                k[i] = m.f0.support.lo[i] + u(rng) * (m.f0.support.hi[i] - m.f0.support.lo[i]);
            }
            // equal up to the rounding of q + 2 pi itself
            Vec q2 = q;
            q2[d - 1] += two_pi;
            EXPECT_NEAR(m.f0.value(q2, k), m.f0.value(q, k), 1e-13);
            EXPECT_NEAR(phi.value(q2, k), phi.value(q, k), 1e-13);
        }
        // vanishing on a shell outside the support
        const DomainBox s = m.f0.support;
        for (int p = 0; p < 50; ++p) {
            Vec q(d);
            Vec k(d);
            for (int i = 0; i < d; ++i) {
                q[i] = two_pi * u(rng);
                k[i] = s.lo[i] + u(rng) * (s.hi[i] - s.lo[i]);
            }
            k[0] = (p % 2) ? s.hi[0] + 1e-9 * (1 + u(rng)) : s.lo[0] - 1e-9 * (1 + u(rng));
            EXPECT_EQ(m.f0.value(q, k), 0.0);
            const DomainBox& sp = phi.support;
            Vec kp = k;
            for (int i = 0; i < d; ++i) {
                kp[i] = sp.lo[i] + u(rng) * (sp.hi[i] - sp.lo[i]);
            }
            kp[0] = (p % 2) ? sp.hi[0] + 1e-9 : sp.lo[0] - 1e-9;
            EXPECT_EQ(phi.value(q, kp), 0.0);
        }
    }
}

TEST(Nondegeneracy, CatalogReports)
{
    const auto fs = check_nondegeneracy(make_builtin_model("free_stream").freq, 17);
    EXPECT_EQ(fs.min_abs_det, 1.0);
    EXPECT_FALSE(fs.degenerate);
    const auto iso = check_nondegeneracy(make_builtin_model("isochronous").freq, 17);
    EXPECT_EQ(iso.min_abs_det, 0.0);
    EXPECT_TRUE(iso.degenerate);
    const auto q = check_nondegeneracy(make_builtin_model("quartic_osc_1st_order").freq, 33);
    EXPECT_NEAR(q.min_abs_det, 0.9, 1e-15);
}

TEST(Nondegeneracy, DegenerateMinimizerApproachesKStar)
{
    const auto m = make_builtin_model("quadratic_degenerate", {{"kstar", 1.3}});
    const DomainBox region = m.freq.domain.inner();
    double previous = 1e300;
    for (int probes : {9, 33, 129, 513}) {
        const auto r = check_nondegeneracy(m.freq, probes);
        const double spacing = (region.hi[0] - region.lo[0]) / (probes - 1);
        EXPECT_LE(std::abs(r.argmin[0] - 1.3), 0.5 * spacing + 1e-12);
        EXPECT_NEAR(r.min_abs_det, std::abs(r.argmin[0] - 1.3), 1e-14);
        EXPECT_LE(r.min_abs_det, previous);
        previous = r.min_abs_det;
    }
    EXPECT_GT(std::abs(omega_second(m.freq, 1.3)), 1e-6);
}

TEST(DomainBox, Invariants)
{
    EXPECT_THROW(DomainBox::interval(1.0, 1.0), ConfigError);
    EXPECT_THROW(DomainBox::interval(0.0, 1.0, 0.5), ConfigError);
    EXPECT_THROW(DomainBox::interval(0.0, 1.0, -0.1), ConfigError);
    const auto b = DomainBox::cube(2, 0.0, 2.0, 0.25);
    EXPECT_DOUBLE_EQ(b.inner().volume(), 1.5 * 1.5);
}

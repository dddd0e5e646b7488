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
#include "phasemix/core.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/quadrature.hpp"
#include "phasemix/transport.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace phasemix;

namespace {

// classical RK4 for a scalar autonomous ODE
double rk4(double y, double rate, double t, int steps)
{
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
        const double k1 = rate;
        const double k2 = rate;
        const double k3 = rate;
        const double k4 = rate;
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return y;
}

FlowPoint random_point(const Model& m, std::mt19937_64& rng, double t)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int d = m.freq.dim();
    Vec q(d);
    Vec k(d);
    const DomainBox s = m.f0.support;
    for (int i = 0; i < d; ++i) {
        q[i] = two_pi * u(rng);
        k[i] = s.lo[i] + u(rng) * (s.hi[i] - s.lo[i]);
    }
    return FlowPoint(t, q, k);
}

} // namespace

TEST(Solution, InitialTimeIsIdentity)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_point(m, rng, 0.0);
        EXPECT_EQ(evaluate_solution(m, p), m.f0.value(p.q, p.k));
    }
}

TEST(Solution, IsochronousFullRevolution)
{
    const auto m = make_builtin_model("isochronous", {{"omega0", 1.0}});
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_point(m, rng, two_pi);
        EXPECT_NEAR(evaluate_solution(m, p), m.f0.value(p.q, p.k), 1e-13);
    }
}

TEST(Solution, FreeStreamCharacteristics)
{
    const auto m = make_builtin_model("free_stream");
    const double g = m.f0.separable->profile(vec1(2.0));
    const double v = evaluate_solution(m, FlowPoint(5.0, vec1(0.0), vec1(2.0)));
    EXPECT_NEAR(v, (1.0 + std::cos(-10.0)) * g, 1e-14);
    // foot of the characteristic by integrating dq/ds = omega(k) backwards
    const double foot = rk4(0.0, m.freq.omega(vec1(2.0))[0], -5.0, 1000);
    EXPECT_NEAR(v, (1.0 + std::cos(foot)) * g, 1e-8);
}

TEST(Solution, DomainErrors)
{
    const auto m = make_builtin_model("free_stream");
    EXPECT_THROW(evaluate_solution(m, FlowPoint(1.0, vec1(0.0), vec1(-1.0))), DomainError);
    EXPECT_THROW(apply_W(m, FlowPoint(1.0, vec1(0.0), vec1(1.0)), 0, 2), UnsupportedError);
}

TEST(Solution, TimeReversal)
{
    for (const auto& name : builtin_model_names()) {
        const auto m = make_builtin_model(name);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ut(0.0, 1000.0);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto p0 = random_point(m, rng, 0.0);
            const double t = ut(rng);
            const Vec qt = advance_angles(m.freq, p0.q, p0.k, t);
            const double v = evaluate_solution(m, FlowPoint(t, qt, p0.k));
            worst = std::max(worst, std::abs(v - m.f0.value(p0.q, p0.k)));
        }
        EXPECT_LE(worst, 1e-10) << name;
    }
}

TEST(VectorField, ZeroPowerAndInitialTime)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_point(m, rng, 17.0);
        EXPECT_EQ(apply_W(m, p, 0, 0), evaluate_solution(m, p));
        const auto p0 = random_point(m, rng, 0.0);
        EXPECT_EQ(apply_W(m, p0, 0, 1), m.f0.grad_k(p0.q, p0.k)[0]);
    }
}

TEST(VectorField, FreeStreamFiniteDifference)
{
    const auto m = make_builtin_model("free_stream");
    const FlowPoint p(3.0, vec1(0.0), vec1(1.0));
    const double h = 1e-6;
    auto f = [&](double q, double k) { return evaluate_solution(m, FlowPoint(3.0, vec1(q), vec1(k))); };
    const double dq = (f(h, 1.0) - f(two_pi - h, 1.0)) / (2 * h);
    const double dk = (f(0.0, 1.0 + h) - f(0.0, 1.0 - h)) / (2 * h);
    const double wf = 3.0 * 1.0 * dq + dk;
    EXPECT_NEAR(apply_W(m, p, 0, 1), wf, 1e-6 * std::max(1.0, std::abs(wf)));
}

TEST(VectorField, CommutesWithTransportEveryModel)
{
    for (const auto& name : builtin_model_names()) {
        const auto m = make_builtin_model(name);
        const int d = m.freq.dim();
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> ut(0.0, 50.0);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto p = random_point(m, rng, ut(rng));
            const Mat J = m.freq.jac(p.k);
            const double h = 1e-7;
            for (int j = 0; j < d; ++j) {
                // t * sum_l (D omega)_{j l} d_{q_l} f + d_{k_j} f
                double wf = 0.0;
                for (int l = 0; l < d; ++l) {
                    Vec qp = p.q;
                    Vec qm = p.q;
                    qp[l] += h;
                    qm[l] -= h;
                    const double dq = (evaluate_solution(m, FlowPoint(p.t, qp, p.k)) -
                                       evaluate_solution(m, FlowPoint(p.t, qm, p.k))) / (2 * h);
                    wf += p.t * J(j, l) * dq;
                }
                Vec kp = p.k;
                Vec km = p.k;
                kp[j] += h;
                km[j] -= h;
                wf += (evaluate_solution(m, FlowPoint(p.t, p.q, kp)) -
                       evaluate_solution(m, FlowPoint(p.t, p.q, km))) / (2 * h);
                const double exact = apply_W(m, p, j, 1);
                worst = std::max(worst, std::abs(exact - wf) / std::max(1.0, std::abs(exact)));
            }
        }
        EXPECT_LE(worst, 1e-5) << name;
    }
}

TEST(Conservation, MassAndWNormConstantInTime)
{
    const auto one = [](const Vec&) { return 1.0; };
    for (const auto& name : builtin_model_names()) {
        const auto m = make_builtin_model(name);
        for (int n : {0, 1}) {
            for (int j = 0; j < (n == 1 ? m.freq.dim() : 1); ++j) {
                const double ref = conserved_integral(m, one, n, 0.0, j);
                for (double t : {1.0, 10.0, 100.0, 1000.0}) {
                    const double v = conserved_integral(m, one, n, t, j);
                    EXPECT_LE(std::abs(v - ref), 1e-6 * std::abs(ref)) << name << " n=" << n << " t=" << t;
                }
            }
        }
    }
}

TEST(Conservation, InitialValues)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    const auto& sp = *m.f0.separable;
    // separable data: the integrals factor into angular and action parts
    const double mass = conserved_integral(m, [](const Vec&) { return 1.0; }, 0, 0.0);
    const auto& gl = gauss_legendre(40);
    double prof = 0.0;
    double dprof = 0.0;
    const auto& p = sp.profiles[0];
    std::vector<double> br = p.knots;
    for (std::size_t s = 0; s + 1 < br.size(); ++s) {
        const double a = br[s];
        const double b = br[s + 1];
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double x = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
            prof += 0.5 * (b - a) * gl.weights[i] * std::abs(p.value(x));
            dprof += 0.5 * (b - a) * gl.weights[i] * std::abs(p.derivative(x));
        }
    }
    EXPECT_NEAR(mass, two_pi * prof, 1e-9 * mass);
    const double w0 = conserved_integral(m, [](const Vec&) { return 1.0; }, 1, 0.0);
    EXPECT_NEAR(w0, two_pi * dprof, 1e-7 * w0);
}

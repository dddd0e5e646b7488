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

#include <gtest/gtest.h>
#include <unsupported/Eigen/Polynomials>

#include <random>
#include <sstream>

using namespace phasemix;

namespace {

double circular_distance(double a, double b)
{
    const double d = std::fmod(std::abs(a - b), two_pi);
    return std::min(d, two_pi - d);
}

struct State {
    double x;
    double p;
};

State rk4_flow(const PotentialWell& w, State s, double time, int steps)
{
    const double h = time / steps;
    auto f = [&](const State& u) { return State{u.p, -w.dV(u.x)}; };
    for (int i = 0; i < steps; ++i) {
        const State k1 = f(s);
        const State k2 = f({s.x + 0.5 * h * k1.x, s.p + 0.5 * h * k1.p});
        const State k3 = f({s.x + 0.5 * h * k2.x, s.p + 0.5 * h * k2.p});
        const State k4 = f({s.x + h * k3.x, s.p + h * k3.p});
        s.x += h / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
        s.p += h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    }
    return s;
}

// step halving until two successive results agree
State flow(const PotentialWell& w, State s, double time)
{
    int steps = 64;
    State prev = rk4_flow(w, s, time, steps);
    for (int it = 0; it < 14; ++it) {
        steps *= 2;
        const State next = rk4_flow(w, s, time, steps);
        if (std::abs(next.x - prev.x) + std::abs(next.p - prev.p) < 1e-12) {
            return next;
        }
        prev = next;
    }
    return prev;
}

const ActionAngleChart& quartic_chart()
{
    static const ActionAngleChart c = build_chart(quartic_well(0.3, 0.01, 5.0), 256);
    return c;
}

} // namespace

TEST(TurningPoints, AnalyticWells)
{
    const auto harm = harmonic_well();
    const auto tp = turning_points(harm, 2.0);
    EXPECT_NEAR(tp.x_minus, -2.0, 1e-12);
    EXPECT_NEAR(tp.x_plus, 2.0, 1e-12);
    const auto x4 = polynomial_well({0.0, 0.0, 0.0, 0.0, 1.0}, 0.01, 4.0, -3.0, 3.0);
    const auto t4 = turning_points(x4, 1.0);
    EXPECT_NEAR(t4.x_minus, -1.0, 1e-12);
    EXPECT_NEAR(t4.x_plus, 1.0, 1e-12);
}

TEST(TurningPoints, QuarticAgainstPolynomialRoots)
{
    const auto w = quartic_well(0.3);
    for (double h : {0.01, 0.3, 1.0, 4.0}) {
        const auto tp = turning_points(w, h);
        Eigen::Matrix<double, 5, 1> c;
        c << -h, 0.0, 0.5, 0.0, 0.3;
        Eigen::PolynomialSolver<double, 4> solver(c);
        std::vector<double> real;
        for (const auto& r : solver.roots()) {
            if (std::abs(r.imag()) < 1e-9) {
                real.push_back(r.real());
            }
        }
        ASSERT_EQ(real.size(), 2u);
        std::sort(real.begin(), real.end());
        EXPECT_NEAR(tp.x_minus, real[0], 1e-12) << h;
        EXPECT_NEAR(tp.x_plus, real[1], 1e-12) << h;
        EXPECT_NEAR(w.V(tp.x_minus), h, 1e-12);
        EXPECT_NEAR(w.V(tp.x_plus), h, 1e-12);
        EXPECT_LT(w.dV(tp.x_minus), 0.0);
        EXPECT_GT(w.dV(tp.x_plus), 0.0);
    }
}

TEST(Well, Validation)
{
    // double well
    EXPECT_THROW(polynomial_well({0.0, 0.0, -1.0, 0.0, 1.0}, 0.1, 1.0, -3.0, 3.0), NotAWellError);
    // h_max above the walls
    EXPECT_THROW(polynomial_well({0.0, 0.0, 0.5}, 0.1, 10.0, -2.0, 2.0), ConfigError);
    EXPECT_THROW(polynomial_well({0.0, 0.0, 0.5}, -0.1, 1.0, -3.0, 3.0), ConfigError);
    PotentialWell bad;
    bad.V = [](double x) { return 0.5 * x * x; };
    bad.dV = [](double x) { return 2.0 * x; };
    bad.h_min = 0.1;
    bad.h_max = 1.0;
    bad.x_lo = -3.0;
    bad.x_hi = 3.0;
    EXPECT_THROW(validate_well(bad), ConfigError);
    // dV = x (x - 1)^2 touches zero at x = 1, a turning point for h = 1/12
    const auto flat = polynomial_well({0.0, 0.0, 0.5, -2.0 / 3.0, 0.25}, 0.01, 1.0, -3.0, 3.0);
    EXPECT_THROW(turning_points(flat, 1.0 / 12.0), DegeneracyError);
    EXPECT_THROW(turning_points(harmonic_well(0.1, 1.0), 50.0), NotAWellError);
}

TEST(Period, Harmonic)
{
    const auto w = harmonic_well();
    for (double h : {1e-4, 0.1, 1.0, 2.0, 7.5}) {
        EXPECT_NEAR(period(w, h), two_pi, 1e-10) << h;
        EXPECT_NEAR(action(w, h), h, 1e-12 * std::max(1.0, h));
    }
}

TEST(Period, PureQuarticScaling)
{
    const auto w = polynomial_well({0.0, 0.0, 0.0, 0.0, 1.0}, 0.01, 5.0, -3.0, 3.0);
    const double ref = period(w, 0.5) * std::pow(0.5, 0.25);
    for (double h : {1.0, 2.0, 4.0}) {
        EXPECT_NEAR(period(w, h) * std::pow(h, 0.25), ref, 1e-8 * ref);
    }
}

TEST(Period, HardeningSpring)
{
    const auto w = quartic_well(0.3);
    double prev = period(w, 0.1);
    for (int i = 1; i <= 200; ++i) {
        const double T = period(w, 0.1 + 2.9 * i / 200.0);
        EXPECT_LT(T, prev);
        prev = T;
    }
}

TEST(Action, VanishingOrbit)
{
    const auto w = quartic_well(0.3, 1e-10, 1.0);
    EXPECT_LT(action(w, 1e-8), 2e-8);
    EXPECT_GT(action(w, 1e-8), 0.0);
}

TEST(Action, PeriodIsDerivativeOfArea)
{
    const auto chart = build_chart(quartic_well(0.3, 0.01, 5.0), 4096);
    double worst = 0.0;
    // uniform h table, five point stencil
    const double step = chart.h[1] - chart.h[0];
    for (std::size_t j = 2; j + 2 < chart.h.size(); j += 7) {
        const double dI = (-chart.I[j + 2] + 8 * chart.I[j + 1] - 8 * chart.I[j - 1] + chart.I[j - 2]) / (12 * step);
        worst = std::max(worst, std::abs(dI * two_pi - chart.T[j]) / chart.T[j]);
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(Chart, TableInvariants)
{
    const auto& c = quartic_chart();
    for (std::size_t j = 0; j < c.h.size(); ++j) {
        if (j > 0) {
            EXPECT_GT(c.I[j], c.I[j - 1]);
        }
        EXPECT_NEAR(c.h_of_action(c.action_of_h(c.h[j])), c.h[j], 1e-8 * c.h[j]);
        EXPECT_NEAR(two_pi / c.period(c.h[j]), c.frequency(c.I[j]), 1e-8);
    }
    EXPECT_EQ(c.omega.degeneracy, Degeneracy::none);
    EXPECT_THROW(build_chart(harmonic_well(), 32), ConfigError);
    EXPECT_THROW(c.h_of_action(c.I.back() + 1.0), DomainError);
}

TEST(Chart, HarmonicIsIsochronous)
{
    const auto c = build_chart(harmonic_well(0.01, 4.0), 128);
    for (double k : {0.05, 1.0, 3.9}) {
        EXPECT_NEAR(c.frequency(k), 1.0, 1e-12);
        EXPECT_NEAR(c.omega.jac(vec1(k))(0, 0), 0.0, 1e-8);
    }
    EXPECT_EQ(c.omega.degeneracy, Degeneracy::everywhere);
}

TEST(Chart, FirstOrderAveraging)
{
    const auto c = build_chart(quartic_well(0.3, 1e-4, 1.0), 128);
    for (double I : {0.01, 0.05, 0.1}) {
        const double w = c.frequency(I);
        EXPECT_LT(std::abs(w - (1.0 + 0.9 * I)) / w, 0.02) << I;
    }
    // small epsilon: series 1 + 3 eps I - (51/4) eps^2 I^2 + (375/4) eps^3 I^3
    const double eps = 0.01;
    const auto s = build_chart(quartic_well(eps, 1e-4, 2.0), 128);
    for (double I : {0.1, 0.3, 0.5}) {
        const double series = 1.0 + 3.0 * eps * I - 12.75 * eps * eps * I * I + 93.75 * std::pow(eps * I, 3);
        EXPECT_LT(std::abs(s.frequency(I) - series), 2e-6) << I;
    }
}

TEST(Chart, JacobianMatchesDifferences)
{
    const auto& c = quartic_chart();
    const auto box = c.action_box();
    const double h = 1e-5;
    for (int i = 1; i < 40; ++i) {
        const double k = box.lo[0] + (box.hi[0] - box.lo[0]) * i / 40.0;
        const double fd = (c.frequency(k + h) - c.frequency(k - h)) / (2 * h);
        EXPECT_NEAR(c.omega.jac(vec1(k))(0, 0), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(Transformation, ConventionPoints)
{
    const auto& c = quartic_chart();
    for (double k : {0.1, 1.0, 2.5}) {
        const double h = c.h_of_action(k);
        const auto tp = turning_points(c.well, h);
        const auto a = to_physical(c, 0.0, k);
        EXPECT_NEAR(a.x, tp.x_minus, 1e-9);
        EXPECT_NEAR(a.p, 0.0, 1e-6);
        const auto b = to_physical(c, pi, k);
        EXPECT_NEAR(b.x, tp.x_plus, 1e-9);
        EXPECT_NEAR(b.p, 0.0, 1e-6);
        const auto back = from_physical(c, tp.x_minus, 0.0);
        EXPECT_LT(circular_distance(back.q, 0.0), 1e-9);
        EXPECT_NEAR(back.k, k, 1e-9);
    }
    EXPECT_THROW(to_physical(c, -0.1, 1.0), DomainError);
    EXPECT_THROW(from_physical(c, 10.0, 0.0), DomainError);
}

TEST(Transformation, HarmonicOracle)
{
    const auto c = build_chart(harmonic_well(0.01, 4.0), 128);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uq(0.0, two_pi);
    std::uniform_real_distribution<double> uk(0.05, 3.9);
    for (int i = 0; i < 200; ++i) {
        const double q = uq(rng);
        const double k = uk(rng);
        const auto pt = to_physical(c, q, k);
        EXPECT_NEAR(pt.x, -std::sqrt(2 * k) * std::cos(q), 1e-9);
        EXPECT_NEAR(pt.p, std::sqrt(2 * k) * std::sin(q), 1e-9);
    }
    const auto mid = to_physical(c, pi / 2, 2.0);
    EXPECT_NEAR(mid.x, 0.0, 1e-12);
    EXPECT_NEAR(mid.p, 2.0, 1e-12);
    const auto a = from_physical(c, 0.0, std::sqrt(2.0));
    EXPECT_NEAR(a.q, pi / 2, 1e-10);
    EXPECT_NEAR(a.k, 1.0, 1e-12);
}

TEST(Transformation, RoundtripAndEnergy)
{
    const auto& c = quartic_chart();
    const auto box = c.action_box();
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> uq(0.0, two_pi);
    std::uniform_real_distribution<double> uk(box.lo[0], box.hi[0]);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double q = uq(rng);
        const double k = uk(rng);
        const auto pt = to_physical(c, q, k);
        EXPECT_NEAR(hamiltonian(c.well, pt.x, pt.p), c.h_of_action(k), 1e-8);
        const auto back = from_physical(c, pt.x, pt.p);
        worst = std::max({worst, circular_distance(back.q, q), std::abs(back.k - k)});
    }
    EXPECT_LE(worst, 1e-6);
    // energy depends on k only
    for (double k : {0.05, 0.7, 2.9}) {
        const double h = c.h_of_action(k);
        double var = 0.0;
        for (int i = 0; i < 64; ++i) {
            const auto pt = to_physical(c, two_pi * i / 64.0, k);
            var += std::pow(hamiltonian(c.well, pt.x, pt.p) - h, 2) / 64.0;
        }
        EXPECT_LE(std::sqrt(var), 1e-12 * std::max(1.0, h));
    }
}

TEST(Transformation, VolumePreserving)
{
    const auto& c = quartic_chart();
    const auto box = c.action_box();
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> uq(0.2, two_pi - 0.2);
    std::uniform_real_distribution<double> uk(box.lo[0] + 0.05, box.hi[0] - 0.05);
    const double d = 1e-5;
    for (int i = 0; i < 100; ++i) {
        const double q = uq(rng);
        const double k = uk(rng);
        const auto qp = to_physical(c, q + d, k);
        const auto qm = to_physical(c, q - d, k);
        const auto kp = to_physical(c, q, k + d);
        const auto km = to_physical(c, q, k - d);
        const double xq = (qp.x - qm.x) / (2 * d);
        const double pq = (qp.p - qm.p) / (2 * d);
        const double xk = (kp.x - km.x) / (2 * d);
        const double pk = (kp.p - km.p) / (2 * d);
        EXPECT_NEAR(std::abs(xq * pk - xk * pq), 1.0, 1e-4) << q << " " << k;
    }
}

TEST(Transformation, LinearizesTheFlow)
{
    const auto& c = quartic_chart();
    const auto box = c.action_box();
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> uq(0.0, two_pi);
    std::uniform_real_distribution<double> uk(box.lo[0], box.hi[0]);
    std::uniform_real_distribution<double> us(0.5, 20.0);
    for (int i = 0; i < 20; ++i) {
        const double q = uq(rng);
        const double k = uk(rng);
        const double s = us(rng);
        const auto pt = to_physical(c, q, k);
        const State end = flow(c.well, {pt.x, pt.p}, s);
        const auto back = from_physical(c, end.x, end.p);
        EXPECT_LE(circular_distance(back.q, q + c.frequency(k) * s), 1e-5);
        EXPECT_NEAR(back.k, k, 1e-5);
    }
}

TEST(Chart, CsvColumns)
{
    const auto c = build_chart(harmonic_well(0.01, 1.0), 64);
    std::ostringstream os;
    write_csv(os, c);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "h,I,T,omega");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 64);
}

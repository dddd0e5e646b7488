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
#include "phasemix/core.hpp"
#include "phasemix/coulomb.hpp"
#include "phasemix/csv.hpp"
#include "phasemix/observables.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/quadrature.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <numeric>
#include <random>

using namespace phasemix;

TEST(GaussLegendre, ExactForPolynomials)
{
    for (int n : {1, 2, 5, 10, 16, 20}) {
        const auto& r = gauss_legendre(n);
        for (int deg = 0; deg < 2 * n; ++deg) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += r.weights[std::size_t(i)] * std::pow(r.nodes[std::size_t(i)], deg);
            }
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            EXPECT_NEAR(s, exact, 1e-14) << n << " " << deg;
        }
    }
    EXPECT_THROW(compute_gauss_legendre(0), ConfigError);
}

TEST(GaussLegendre, LongDoubleRule)
{
    const auto r = compute_gauss_legendre<long double>(12);
    long double s = 0;
    for (int i = 0; i < 12; ++i) {
        s += r.weights[std::size_t(i)] * std::cos(r.nodes[std::size_t(i)]);
    }
    EXPECT_NEAR(double(s), 2.0 * std::sin(1.0), 1e-15);
}

TEST(Breaks, Grading)
{
    const auto b = graded_breaks(0.0, 1.0, 2, true, false, 3);
    const std::vector<double> want = {0.0, 0.0625, 0.125, 0.25, 0.5, 1.0};
    EXPECT_EQ(b, want);
    const std::vector<double> knots = {-1.0, 0.2, 0.2, 0.7, 3.0};
    const auto c = clip_knots(knots, 0.0, 1.0);
    const std::vector<double> want_c = {0.0, 0.2, 0.7, 1.0};
    EXPECT_EQ(c, want_c);
}

TEST(Summation, PairwiseIsOrderIndependentOfBlocking)
{
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(5000);
    for (auto& x : v) {
        x = u(rng);
    }
    Accumulator<double> a;
    for (double x : v) {
        a.add(x);
    }
    long double ref = 0;
    for (double x : v) {
        ref += x;
    }
    EXPECT_NEAR(a.sum(), double(ref), a.rounding_error());
}

TEST(Parallel, ResultsIndependentOfWorkerCount)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    const auto phi = default_phi(m.freq.domain);
    const auto times = log_spaced(1.0, 300.0, 24);
    std::vector<std::vector<double>> runs;
    for (const char* w : {"1", "3"}) {
        setenv("PHASEMIX_THREADS", w, 1);
        EXPECT_EQ(worker_count(), std::atoi(w));
        const auto s = deviation_series(m, phi, times);
        runs.push_back(s.values);
        std::vector<double> e;
        for (double t : {0.0, 7.0, 150.0}) {
            e.push_back(expectation_direct(m, phi, t).value);
        }
        runs.push_back(e);
    }
    unsetenv("PHASEMIX_THREADS");
    EXPECT_EQ(std::memcmp(runs[0].data(), runs[2].data(), runs[0].size() * sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(runs[1].data(), runs[3].data(), runs[1].size() * sizeof(double)), 0);
}

TEST(Parallel, ExceptionsPropagate)
{
    setenv("PHASEMIX_THREADS", "2", 1);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) {
                         throw NumericalFailure("phasemix::test: boom");
                     }
                 }),
                 NumericalFailure);
    unsetenv("PHASEMIX_THREADS");
}

TEST(Csv, FullPrecision)
{
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(-2.5e-300), "-2.5e-300");
    EXPECT_EQ(format_double(1e23), "9.9999999999999992e+22");
    const double x = 1.0 / 3.0;
    EXPECT_EQ(std::stod(format_double(x)), x);
}

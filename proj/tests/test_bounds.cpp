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
#include "phasemix/bounds.hpp"
#include "phasemix/core.hpp"
#include "phasemix/observables.hpp"
#include "phasemix/quadrature.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace phasemix;

namespace {

// composite Gauss-Legendre on many small panels between the given breaks
template <typename F>
double fine_integral(F&& f, std::vector<double> breaks, int per_panel = 64)
{
    std::sort(breaks.begin(), breaks.end());
    const auto& gl = gauss_legendre(12);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double len = (breaks[i + 1] - breaks[i]) / per_panel;
        for (int p = 0; p < per_panel; ++p) {
            const double a = breaks[i] + p * len;
            for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
                s += 0.5 * len * gl.weights[j] * f(a + 0.5 * len * (1.0 + gl.nodes[j]));
            }
        }
    }
    return s;
}

ScalarField flat_in_k(const DomainBox& domain, Angular1D ang)
{
    SeparableParts p;
    for (int i = 0; i < domain.d; ++i) {
        Profile1D c = constant_profile(domain.lo[i], domain.hi[i]);
        p.profiles.push_back(c);
        p.angulars.push_back(i == 0 ? ang : angular_constant(1.0));
    }
    return make_separable_field(domain, std::move(p));
}

} // namespace

TEST(Bound1D, QuarticAgainstIndependentQuadrature)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    const auto phi = default_phi(m.freq.domain);
    const auto b = bound_1d(m, phi);
    const auto& fs = *m.f0.separable;
    const auto& ps = *phi.separable;
    const double wp = 0.9;
    std::vector<double> br = m.f0.knots[0];
    br.insert(br.end(), phi.knots[0].begin(), phi.knots[0].end());
    const double a_f = fs.angulars[0].abs_integral;
    const double a_p = ps.angulars[0].abs_integral;
    // the angular integrals are 2 pi for 1 + cos q
    EXPECT_NEAR(a_f, two_pi, 1e-12);
    const double first = fine_integral(
        [&](double k) { return a_p * std::abs(ps.profiles[0].value(k)) * a_f * std::abs(fs.profiles[0].derivative(k)) / wp; },
        br);
    const double second = fine_integral(
        [&](double k) { return a_p * std::abs(ps.profiles[0].derivative(k) / wp) * a_f * std::abs(fs.profiles[0].value(k)); },
        br);
    EXPECT_NEAR(b.ingredients.at("phi_over_omegap_dk_f0"), first, 1e-7 * first);
    EXPECT_NEAR(b.ingredients.at("f0_dk_phi_over_omegap"), second, 1e-7 * second);
    EXPECT_GE(b.constant, first + second - 1e-7 * (first + second));
    EXPECT_EQ(b.kind, BoundKind::prop21);
}

TEST(Bound1D, FlatTestFunctionRemovesSecondTerm)
{
    const auto m = make_builtin_model("free_stream");
    const auto phi = flat_in_k(m.freq.domain, angular_cosine(1.0, 0.5));
    const auto b = bound_1d(m, phi);
    EXPECT_NEAR(b.ingredients.at("f0_dk_phi_over_omegap"), 0.0, 1e-14);
    const auto& fs = *m.f0.separable;
    const double dk = fine_integral([&](double k) { return std::abs(fs.profiles[0].derivative(k)); }, m.f0.knots[0]);
    const double want = phi.separable->angulars[0].abs_integral * fs.angulars[0].abs_integral * dk;
    EXPECT_NEAR(b.constant, want, 1e-8 * want);
}

TEST(Bound1D, LinearInData)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    const auto phi = default_phi(m.freq.domain);
    const double c = bound_1d(m, phi).constant;
    Model m2 = m;
    m2.f0 = scaled(m.f0, 2.0);
    EXPECT_NEAR(bound_1d(m2, phi).constant, 2.0 * c, 1e-9 * c);
    EXPECT_NEAR(bound_1d(m, scaled(phi, 0.3)).constant, 0.3 * c, 1e-9 * c);
}

TEST(Bound1D, ValidOnQuarticSeries)
{
    const auto m = make_builtin_model("quartic_osc_1st_order");
    const auto phi = default_phi(m.freq.domain);
    const auto b = bound_1d(m, phi);
    const auto s = deviation_series(m, phi, log_spaced(1.0, 1000.0, 60));
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(s.times[i] * s.values[i], b.constant + s.times[i] * s.errors[i]) << s.times[i];
    }
}

TEST(Bound1D, DegenerateSupportRejected)
{
    const auto m = make_builtin_model("quadratic_degenerate");
    const auto phi = default_phi(m.freq.domain);
    EXPECT_THROW(bound_1d(m, phi), DegeneracyError);
    const auto cut = make_cutoff({m.freq.degenerate_points[0][0]}, 0.2, m.freq.domain);
    const auto b = bound_1d(m, apply_cutoff(phi, cut));
    EXPECT_TRUE(std::isfinite(b.constant));
    EXPECT_GT(b.constant, 0.0);
    EXPECT_THROW(localized_bound(make_builtin_model("quartic_osc_1st_order"), phi, 10.0), PreconditionError);
}

TEST(BoundMultiD, ProductIdentityMap)
{
    const auto m = make_builtin_model("product_2d");
    const auto phi = default_phi(m.freq.domain);
    const auto b = bound_multid(m, phi);
    EXPECT_EQ(b.kind, BoundKind::prop31);
    // sup |phi| = 2 with the 5% inflation
    EXPECT_NEAR(b.ingredients.at("linf_Minf_phi"), 2.0 * 1.05, 1e-9);
    const auto flat = flat_in_k(m.freq.domain, angular_cosine(1.0, 1.0));
    const auto bf = bound_multid(m, flat);
    EXPECT_NEAR(bf.ingredients.at("linf_div_M_phi"), 0.0, 1e-12);
    const double grads = bf.ingredients.at("l1_dk1_f0") + bf.ingredients.at("l1_dk2_f0");
    EXPECT_NEAR(bf.constant, 4.0 * pi * bf.ingredients.at("linf_Minf_phi") * grads, 1e-9 * bf.constant);
}

TEST(BoundMultiD, ValidOnProductSeries)
{
    const auto m = make_builtin_model("product_2d");
    const auto phi = default_phi(m.freq.domain);
    const auto b = bound_multid(m, phi);
    const auto s = deviation_series(m, phi, log_spaced(1.0, 300.0, 20));
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(s.times[i] * s.values[i], b.constant + s.times[i] * s.errors[i]);
    }
    EXPECT_THROW(bound_multid(make_builtin_model("free_stream"), default_phi(DomainBox::interval(0, 3, 0.1))),
                 PreconditionError);
}

TEST(Cutoff, ProfileProperties)
{
    const auto dom = DomainBox::interval(0.0, 3.0, 0.1);
    const auto cut = make_cutoff({1.5}, 0.1, dom);
    EXPECT_EQ(cut.eta(1.5), 0.0);
    for (double k : {1.0, 1.39, 1.61, 2.2}) {
        EXPECT_EQ(cut.eta(k), 1.0) << k;
    }
    for (double k : {1.451, 1.5, 1.549}) {
        EXPECT_EQ(cut.eta(k), 0.0) << k;
    }
    const double mass = fine_integral([&](double k) { return 1.0 - cut.eta(k); }, {1.3, 1.4, 1.45, 1.55, 1.6, 1.7});
    EXPECT_GE(mass, 0.1);
    EXPECT_LE(mass, 0.2);
    // C^2: analytic derivatives match differences and are continuous across the knots
    const double h = 1e-6;
    for (double k = 1.38; k < 1.62; k += 0.0037) {
        EXPECT_NEAR(cut.eta_d1(k), (cut.eta(k + h) - cut.eta(k - h)) / (2 * h), 1e-5);
        EXPECT_NEAR(cut.eta_d2(k), (cut.eta_d1(k + h) - cut.eta_d1(k - h)) / (2 * h), 1e-3);
    }
    for (double kn : cut.knots()) {
        EXPECT_NEAR(cut.eta_d2(kn - 1e-9), cut.eta_d2(kn + 1e-9), 1e-3);
    }
    EXPECT_THROW(make_cutoff({1.5}, 1.5, dom), ConfigError);
    EXPECT_THROW(make_cutoff({5.0}, 0.1, dom), ConfigError);
}

TEST(Localized, OptimalCutoffScaling)
{
    const auto m = make_builtin_model("quadratic_degenerate");
    const auto phi = default_phi(m.freq.domain);
    const auto b = localized_bound(m, phi, 1000.0);
    ASSERT_TRUE(b.epsilon_star.has_value());
    EXPECT_GE(*b.epsilon_star, 0.1 / 3.0);
    EXPECT_LE(*b.epsilon_star, 0.1 * 3.0);
    EXPECT_LE(*b.epsilon_star, 1.0);
    const auto times = log_spaced(100.0, 1e5, 16);
    std::vector<double> B;
    for (double t : times) {
        B.push_back(localized_bound(m, phi, t).constant);
    }
    for (std::size_t i = 1; i < B.size(); ++i) {
        EXPECT_LE(B[i], B[i - 1]);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double x = std::log(times[i]);
        const double y = std::log(B[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope, -1.0 / 3.0, 0.05);
}

TEST(Localized, DominatesDeviation)
{
    const auto m = make_builtin_model("quadratic_degenerate");
    const auto phi = default_phi(m.freq.domain);
    const auto s = deviation_series(m, phi, log_spaced(10.0, 1000.0, 20));
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(s.values[i], localized_bound(m, phi, s.times[i]).constant);
    }
}

TEST(Bounds, CsvLayout)
{
    MixingBound a;
    a.constant = 2.0;
    a.ingredients = {{"x", 1.0}};
    MixingBound b;
    b.kind = BoundKind::localized;
    b.constant = 0.5;
    b.t = 10.0;
    b.epsilon_star = 0.25;
    b.ingredients = {{"y", 3.0}};
    std::ostringstream os;
    write_csv(os, {a, b});
    EXPECT_EQ(os.str(), "kind,t,constant,epsilon_star,ingredient:x,ingredient:y\n"
                        "prop21,,2,,1,\nlocalized,10,0.5,0.25,,3\n");
}

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
// Acceptance suite: one PASS/FAIL line per criterion.
#include "phasemix/actionangle.hpp"
#include "phasemix/bounds.hpp"
#include "phasemix/core.hpp"
#include "phasemix/coulomb.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/observables.hpp"
#include "phasemix/quadrature.hpp"
#include "phasemix/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace phasemix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

std::string sci(double a)
{
    return fmt("%.3e", a);
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double circular_distance(double a, double b)
{
    const double d = std::fmod(std::abs(a - b), two_pi);
    return std::min(d, two_pi - d);
}

// 1. rate, 1-D
Outcome mixing_rate()
{
    const auto t0 = std::chrono::steady_clock::now();
    const Model m = make_builtin_model("quartic_osc_1st_order", {{"epsilon", 0.3}});
    const auto s = deviation_series(m, default_phi(m.freq.domain), log_spaced(10.0, 1000.0, 80));
    const auto fit = fit_envelope_exponent(s);
    const double wall = seconds_since(t0);
    const bool ok = fit.slope >= -1.15 && fit.slope <= -0.85 && wall < 120.0;
    return {ok, "slope " + fmt("%.4f", fit.slope) + " +- " + fmt("%.4f", fit.std_error) + ", " +
                    fmt("%.2f", wall) + " s"};
}

// 2. t D(t) <= C
Outcome bound_validity()
{
    const Model m = make_builtin_model("quartic_osc_1st_order", {{"epsilon", 0.3}});
    const ScalarField phi = default_phi(m.freq.domain);
    const auto s = deviation_series(m, phi, log_spaced(10.0, 1000.0, 80));
    const auto b = bound_1d(m, phi);
    int bad = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double lhs = s.times[i] * s.values[i];
        bad += lhs > b.constant + s.times[i] * s.errors[i];
        worst = std::max(worst, lhs);
    }
    return {bad == 0, "max t*D " + fmt("%.4f", worst) + " vs C " + fmt("%.4f", b.constant) + ", " +
                          std::to_string(bad) + " violations"};
}

// 3. conserved integrals
Outcome conservation()
{
    const Model m = make_builtin_model("quartic_osc_1st_order", {{"epsilon", 0.3}});
    const auto one = [](const Vec&) { return 1.0; };
    double drift = 0.0;
    for (int n : {0, 1}) {
        const double ref = conserved_integral(m, one, n, 0.0);
        for (double t : {1.0, 10.0, 100.0, 1000.0}) {
            drift = std::max(drift, std::abs(conserved_integral(m, one, n, t) - ref) / std::abs(ref));
        }
    }
    return {drift <= 1e-6, "max relative drift " + sci(drift)};
}

// 4. isochronous control
Outcome isochronous()
{
    const Model m = make_builtin_model("isochronous", {{"omega0", 1.0}});
    const ScalarField phi = default_phi(m.freq.domain);
    const auto ts = log_spaced(1e2, 1e4, 400);
    std::vector<double> shifted;
    for (double t : ts) {
        shifted.push_back(t + two_pi);
    }
    // shifted times interleave with ts; each series must be increasing on its own
    const auto a = deviation_series(m, phi, ts);
    const auto b = deviation_series(m, phi, shifted);
    double gap = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        gap = std::max(gap, std::abs(a.values[i] - b.values[i]));
    }
    const auto fit = fit_envelope_exponent(a);
    const bool ok = gap <= 1e-8 && std::abs(fit.slope) <= 0.05;
    return {ok, "max |D(t+2pi)-D(t)| " + sci(gap) + ", slope " + fmt("%.4f", fit.slope)};
}

// 5. degenerate rate
Outcome degenerate()
{
    const Model m = make_builtin_model("quadratic_degenerate");
    const ScalarField phi = default_phi(m.freq.domain);
    const auto ts = log_spaced(10.0, 1000.0, 80);
    const auto s = deviation_series(m, phi, ts);
    const auto fit = fit_envelope_exponent(s);
    int dominated = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        dominated += s.values[i] <= localized_bound(m, phi, ts[i]).constant;
    }
    const auto tb = log_spaced(1e2, 1e5, 31);
    std::vector<double> B;
    for (double t : tb) {
        B.push_back(localized_bound(m, phi, t).constant);
    }
    const auto bfit = fit_envelope_exponent(tb, B);
    const bool ok = fit.slope <= -1.0 / 3.0 + 0.05 && dominated == int(ts.size()) &&
                    std::abs(bfit.slope + 1.0 / 3.0) <= 0.05;
    return {ok, "D slope " + fmt("%.4f", fit.slope) + ", B >= D at " + std::to_string(dominated) + "/" +
                    std::to_string(ts.size()) + ", B slope " + fmt("%.4f", bfit.slope)};
}

// 6. two dimensions
Outcome dimension_independence()
{
    const Model m = make_builtin_model("product_2d");
    const ScalarField phi = default_phi(m.freq.domain);
    const auto s = deviation_series(m, phi, log_spaced(10.0, 1000.0, 80));
    const auto b = bound_multid(m, phi);
    int bad = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double lhs = s.times[i] * s.values[i];
        bad += lhs > b.constant + s.times[i] * s.errors[i];
        worst = std::max(worst, lhs);
    }
    const auto fit = fit_envelope_exponent(s);
    const bool ok = bad == 0 && fit.slope >= -1.2 && fit.slope <= -0.8;
    return {ok, "slope " + fmt("%.4f", fit.slope) + ", max t*D " + fmt("%.3f", worst) + " vs C " +
                    fmt("%.2f", b.constant)};
}

// 7. action-angle checks
struct State {
    double x;
    double p;
};

State rk4(const PotentialWell& w, State s, double time, int steps)
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

State flow(const PotentialWell& w, State s, double time)
{
    int steps = 64;
    State prev = rk4(w, s, time, steps);
    for (int it = 0; it < 14; ++it) {
        steps *= 2;
        const State next = rk4(w, s, time, steps);
        if (std::abs(next.x - prev.x) + std::abs(next.p - prev.p) < 1e-12) {
            return next;
        }
        prev = next;
    }
    return prev;
}

Outcome action_angle()
{
    const auto hw = harmonic_well();
    double harm = 0.0;
    for (double h : {1e-4, 0.1, 1.0, 2.0, 7.5}) {
        harm = std::max(harm, std::abs(period(hw, h) - two_pi));
    }

    const auto fine = build_chart(quartic_well(0.3, 0.01, 5.0), 4096);
    double area = 0.0;
    // uniform h table, five point stencil
    const double step = fine.h[1] - fine.h[0];
    for (std::size_t j = 2; j + 2 < fine.h.size(); j += 7) {
        const double dI = (-fine.I[j + 2] + 8 * fine.I[j + 1] - 8 * fine.I[j - 1] + fine.I[j - 2]) / (12 * step);
        area = std::max(area, std::abs(dI * two_pi - fine.T[j]) / fine.T[j]);
    }

    const auto c = build_chart(quartic_well(0.3, 0.01, 5.0), 256);
    const auto box = c.action_box();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uq(0.0, two_pi);
    std::uniform_real_distribution<double> uk(box.lo[0], box.hi[0]);
    double roundtrip = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double q = uq(rng);
        const double k = uk(rng);
        const auto pt = to_physical(c, q, k);
        const auto back = from_physical(c, pt.x, pt.p);
        roundtrip = std::max({roundtrip, circular_distance(back.q, q), std::abs(back.k - k)});
    }

    std::uniform_real_distribution<double> us(0.5, 20.0);
    double conj = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double q = uq(rng);
        const double k = uk(rng);
        const double s = us(rng);
        const auto pt = to_physical(c, q, k);
        const State end = flow(c.well, {pt.x, pt.p}, s);
        const auto back = from_physical(c, end.x, end.p);
        conj = std::max({conj, circular_distance(back.q, q + c.frequency(k) * s), std::abs(back.k - k)});
    }

    std::uniform_real_distribution<double> uq2(0.2, two_pi - 0.2);
    std::uniform_real_distribution<double> uk2(box.lo[0] + 0.05, box.hi[0] - 0.05);
    const double d = 1e-5;
    double det = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double q = uq2(rng);
        const double k = uk2(rng);
        const auto qp = to_physical(c, q + d, k);
        const auto qm = to_physical(c, q - d, k);
        const auto kp = to_physical(c, q, k + d);
        const auto km = to_physical(c, q, k - d);
        const double j = ((qp.x - qm.x) * (kp.p - km.p) - (kp.x - km.x) * (qp.p - qm.p)) / (4 * d * d);
        det = std::max(det, std::abs(std::abs(j) - 1.0));
    }

    const bool ok = harm <= 1e-10 && area <= 1e-6 && roundtrip <= 1e-6 && conj <= 1e-5 && det <= 1e-4;
    return {ok, "harmonic T " + sci(harm) + ", T=area' " + sci(area) + ", roundtrip " + sci(roundtrip) +
                    ", conjugacy " + sci(conj) + ", |det|-1 " + sci(det)};
}

// 8. Coulomb potential, d = 1
template <typename F>
double gl_breaks(F&& f, std::vector<double> br, int per_panel)
{
    std::sort(br.begin(), br.end());
    const auto& gl = gauss_legendre(16);
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

Outcome coulomb()
{
    const double cx = 1.0;
    const double radius = 0.75;
    auto chart = std::make_shared<const ActionAngleChart>(build_chart(quartic_well(0.3, 0.01, 5.0), 256));
    const auto dens = gaussian_density(chart, cx, 0.0, 0.25, radius);
    std::vector<double> x0;
    for (int i = 0; i <= 20; ++i) {
        x0.push_back(-2.0 + 4.0 * i / 20.0);
    }
    const auto ts = log_spaced(10.0, 500.0, 68);
    const auto s = coulomb_deviation(dens, chart->omega, ts, x0);
    const auto fit = fit_envelope_exponent(s.series);
    double origin = 0.0;
    for (const auto& row : s.per_x0) {
        origin = std::max(origin, std::abs(row[10]));
    }

    // t = 0 against physical-space quadrature of the p-marginal
    const CoulombEvaluator ev(dens, chart->omega, x0);
    const auto v = ev.potential(0.0);
    const auto marginal = [&](double x) {
        const double dx = x - cx;
        if (std::abs(dx) >= radius) {
            return 0.0;
        }
        const double pm = std::sqrt(radius * radius - dx * dx);
        std::vector<double> br = {-pm, pm};
        if (std::abs(dx) < 0.5 * radius) {
            const double pin = std::sqrt(0.25 * radius * radius - dx * dx);
            br.push_back(-pin);
            br.push_back(pin);
        }
        return gl_breaks([&](double p) { return dens.F0(x, p); }, br, 8);
    };
    double initial = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        std::vector<double> br = {cx - radius, cx - 0.5 * radius, cx + 0.5 * radius, cx + radius};
        if (x0[i] > cx - radius && x0[i] < cx + radius) {
            br.push_back(x0[i]);
        }
        const double ref = gl_breaks(
            [&](double x) { return marginal(x) * ((x0[i] <= x ? x0[i] - x : 0.0) + std::max(0.0, x)); }, br, 8);
        initial = std::max(initial, std::abs(v[i].value - ref));
    }
    const bool ok = fit.slope <= -0.85 && origin == 0.0 && initial <= 1e-6;
    return {ok, "slope " + fmt("%.4f", fit.slope) + ", max |dev(x0=0)| " + sci(origin) + ", t=0 gap " +
                    sci(initial)};
}

// 9. spectral vs direct
Outcome cross_validation()
{
    std::vector<double> ts = {0.0};
    for (double t : log_spaced(0.5, 200.0, 24)) {
        ts.push_back(t);
    }
    int bad = 0;
    int total = 0;
    double worst = 0.0;
    for (const auto& name : builtin_model_names()) {
        const Model m = make_builtin_model(name);
        const ScalarField phi = default_phi(m.freq.domain);
        for (double t : ts) {
            const auto a = expectation_spectral(m, phi, t);
            const auto b = expectation_direct(m, phi, t);
            const double r = std::abs(a.value - b.value) / (a.err + b.err);
            bad += r > 1.0;
            worst = std::max(worst, r);
            ++total;
        }
    }
    return {bad == 0, std::to_string(total - bad) + "/" + std::to_string(total) +
                          " agree, max gap/err " + fmt("%.3f", worst)};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"mixing rate 1-D", mixing_rate},
        {"bound validity 1-D", bound_validity},
        {"conservation", conservation},
        {"isochronous control", isochronous},
        {"degenerate rate", degenerate},
        {"dimension independence", dimension_independence},
        {"action-angle fidelity", action_angle},
        {"coulomb potential", coulomb},
        {"cross-validation", cross_validation},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

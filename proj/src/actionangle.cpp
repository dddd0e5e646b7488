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
#include "phasemix/actionangle.hpp"

#include "phasemix/csv.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace phasemix {

namespace {

constexpr int orbit_order = 20;
constexpr double orbit_rel_tol = 1e-12;
constexpr int orbit_max_doublings = 12;

std::string num(double v)
{
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

// Composite GL over [a, b] with `panels` equal panels.
template <typename F>
double gl_panels(F&& f, double a, double b, int panels)
{
    const auto& gl = gauss_legendre(orbit_order);
    const double hw = 0.5 * (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (2 * p + 1) * hw;
        double s = 0.0;
        for (int i = 0; i < orbit_order; ++i) {
            s += gl.weights[i] * f(mid + hw * gl.nodes[i]);
        }
        total += hw * s;
    }
    return total;
}

// Integral over theta in [-pi/2, pi/2], split at 0, doubling panels per half.
template <typename F>
double half_orbit_integral(F&& f, const char* op, int* panels_out = nullptr)
{
    int panels = 1;
    double prev = gl_panels(f, -0.5 * pi, 0.0, panels) + gl_panels(f, 0.0, 0.5 * pi, panels);
    for (int it = 0; it < orbit_max_doublings; ++it) {
        panels *= 2;
        const double next =
            gl_panels(f, -0.5 * pi, 0.0, panels) + gl_panels(f, 0.0, 0.5 * pi, panels);
        if (std::abs(next - prev) <= orbit_rel_tol * std::abs(next)) {
            if (panels_out) {
                *panels_out = panels;
            }
            return next;
        }
        prev = next;
    }
    throw NumericalFailure(std::string("phasemix::") + op + ": orbit quadrature did not converge",
                           prev);
}

// (x, dd) at theta with dd the divided difference against the nearer turning point.
struct OrbitLocal {
    double s;
    double dd;
};

OrbitLocal orbit_local(const PotentialWell& well, const Orbit& orb, double theta)
{
    const double s = std::sin(theta);
    const double x = orb.c + orb.r * s;
    if (theta >= 0.0) {
        return {s, divided_difference(well, x, orb.x_plus)};
    }
    return {s, divided_difference(well, x, orb.x_minus)};
}

double bisect_root(const std::function<double(double)>& f, double a, double b)
{
    // f(a) and f(b) have opposite signs
    double fa = f(a);
    if (fa == 0.0) {
        return a;
    }
    if (f(b) == 0.0) {
        return b;
    }
    for (int it = 0; it < 400; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= std::min(a, b) || m >= std::max(a, b)) {
            break;
        }
        const double fm = f(m);
        if (fm == 0.0) {
            return m;
        }
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

double orbit_action(const PotentialWell& well, const Orbit& orb)
{
    const double area = half_orbit_integral(
        [&](double th) { return orbit_momentum(well, orb, th) * orb.r * std::cos(th); },
        "action");
    return area / pi;
}

} // namespace

// ---------------------------------------------------------------------------
// PotentialWell

double divided_difference(const PotentialWell& well, double x, double y)
{
    if (well.divided) {
        return well.divided(x, y);
    }
    if (std::abs(x - y) > 1e-3 * (1.0 + std::abs(x) + std::abs(y))) {
        return (well.V(x) - well.V(y)) / (x - y);
    }
    return (well.dV(x) + 4.0 * well.dV(0.5 * (x + y)) + well.dV(y)) / 6.0;
}

PotentialWell validate_well(PotentialWell well)
{
    if (!well.V || !well.dV) {
        throw ConfigError("phasemix::validate_well: V and dV are required");
    }
    if (!(std::isfinite(well.x_lo) && std::isfinite(well.x_hi) && well.x_lo < well.x_hi)) {
        throw ConfigError("phasemix::validate_well: x_search must be a finite interval");
    }
    if (!(std::isfinite(well.h_min) && std::isfinite(well.h_max) && well.h_min < well.h_max)) {
        throw ConfigError("phasemix::validate_well: h_range must be a finite interval");
    }
    constexpr int samples = 2048;
    const double dx = (well.x_hi - well.x_lo) / samples;
    int changes = 0;
    int last_sign = 0;
    double last_x = well.x_lo;
    double bracket_lo = well.x_lo;
    double bracket_hi = well.x_hi;
    for (int i = 0; i <= samples; ++i) {
        const double x = well.x_lo + i * dx;
        const double g = well.dV(x);
        const double del = 1e-5 * (1.0 + std::abs(x));
        const double fd = (well.V(x + del) - well.V(x - del)) / (2.0 * del);
        if (!(std::abs(g - fd) <= 1e-6 * std::max(1.0, std::abs(g)))) {
            throw ConfigError("phasemix::validate_well: dV disagrees with differences of V at x = " +
                              num(x));
        }
        const int sign = g > 0 ? 1 : (g < 0 ? -1 : 0);
        if (sign != 0) {
            if (last_sign != 0 && sign != last_sign) {
                ++changes;
                bracket_lo = last_x;
                bracket_hi = x;
            }
            last_sign = sign;
            last_x = x;
        }
    }
    if (changes != 1 || !(well.dV(well.x_lo) < 0) || !(well.dV(well.x_hi) > 0)) {
        throw NotAWellError("phasemix::validate_well: expected a single minimum on x_search, found " +
                            std::to_string(changes) + " critical points");
    }
    well.x_min = bisect_root(well.dV, bracket_lo, bracket_hi);
    well.v_min = well.V(well.x_min);
    if (!(well.h_min > well.v_min)) {
        throw ConfigError("phasemix::validate_well: h_min must exceed min V = " + num(well.v_min));
    }
    if (!(well.h_max < std::min(well.V(well.x_lo), well.V(well.x_hi)))) {
        throw ConfigError("phasemix::validate_well: h_max exceeds V at the ends of x_search");
    }
    return well;
}

PotentialWell polynomial_well(std::vector<double> coeffs, double h_min, double h_max, double x_lo,
                              double x_hi)
{
    if (coeffs.size() < 3) {
        throw ConfigError("phasemix::polynomial_well: need at least quadratic order");
    }
    for (double c : coeffs) {
        if (!std::isfinite(c)) {
            throw ConfigError("phasemix::polynomial_well: coefficients must be finite");
        }
    }
    PotentialWell w;
    w.V = [coeffs](double x) {
        double v = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
            v = v * x + *it;
        }
        return v;
    };
    w.dV = [coeffs](double x) {
        double v = 0.0;
        for (std::size_t i = coeffs.size() - 1; i >= 1; --i) {
            v = v * x + double(i) * coeffs[i];
        }
        return v;
    };
    w.divided = [coeffs](double x, double y) {
        // sum_i a_i (x^{i-1} + x^{i-2} y + ... + y^{i-1})
        double e = 1.0;
        double ypow = 1.0;
        double total = coeffs[1];
        for (std::size_t i = 2; i < coeffs.size(); ++i) {
            ypow *= y;
            e = x * e + ypow;
            total += coeffs[i] * e;
        }
        return total;
    };
    w.h_min = h_min;
    w.h_max = h_max;
    w.x_lo = x_lo;
    w.x_hi = x_hi;
    return validate_well(std::move(w));
}

PotentialWell harmonic_well(double h_min, double h_max)
{
    const double X = 2.0 * std::sqrt(2.0 * std::abs(h_max)) + 1.0;
    return polynomial_well({0.0, 0.0, 0.5}, h_min, h_max, -X, X);
}

PotentialWell quartic_well(double epsilon, double h_min, double h_max)
{
    if (!(epsilon >= 0.0)) {
        throw ConfigError("phasemix::quartic_well: epsilon must be nonnegative");
    }
    const double X = 2.0 * std::sqrt(2.0 * std::abs(h_max)) + 1.0;
    return polynomial_well({0.0, 0.0, 0.5, 0.0, epsilon}, h_min, h_max, -X, X);
}

double hamiltonian(const PotentialWell& well, double x, double p)
{
    return 0.5 * p * p + well.V(x);
}

// ---------------------------------------------------------------------------
// Orbits

TurningPoints turning_points(const PotentialWell& well, double h)
{
    if (!(h > well.v_min) || !(h < well.V(well.x_lo)) || !(h < well.V(well.x_hi))) {
        throw NotAWellError("phasemix::turning_points: V = " + num(h) +
                            " does not have two roots in x_search");
    }
    auto f = [&](double x) { return well.V(x) - h; };
    TurningPoints tp;
    tp.x_minus = bisect_root(f, well.x_lo, well.x_min);
    tp.x_plus = bisect_root(f, well.x_min, well.x_hi);
    if (std::abs(well.dV(tp.x_minus)) < 1e-10 || std::abs(well.dV(tp.x_plus)) < 1e-10) {
        throw DegeneracyError("phasemix::turning_points: dV vanishes at a turning point for h = " +
                              num(h));
    }
    return tp;
}

double orbit_time_density(const PotentialWell& well, const Orbit& orb, double theta)
{
    const auto [s, dd] = orbit_local(well, orb, theta);
    if (theta >= 0.0) {
        return std::sqrt(orb.r * (1.0 + s) / (2.0 * dd));
    }
    return std::sqrt(orb.r * (1.0 - s) / (-2.0 * dd));
}

double orbit_momentum(const PotentialWell& well, const Orbit& orb, double theta)
{
    const auto [s, dd] = orbit_local(well, orb, theta);
    if (theta >= 0.0) {
        return std::sqrt(std::max(0.0, 2.0 * dd * orb.r * (1.0 - s)));
    }
    return std::sqrt(std::max(0.0, -2.0 * dd * orb.r * (1.0 + s)));
}

Orbit make_orbit(const PotentialWell& well, double h)
{
    const TurningPoints tp = turning_points(well, h);
    Orbit orb;
    orb.h = h;
    orb.x_minus = tp.x_minus;
    orb.x_plus = tp.x_plus;
    orb.c = 0.5 * (tp.x_minus + tp.x_plus);
    orb.r = 0.5 * (tp.x_plus - tp.x_minus);
    orb.period = 2.0 * half_orbit_integral(
                           [&](double th) { return orbit_time_density(well, orb, th); }, "period",
                           &orb.panels);
    return orb;
}

double travel_time(const PotentialWell& well, const Orbit& orb, double theta)
{
    theta = std::clamp(theta, -0.5 * pi, 0.5 * pi);
    auto g = [&](double th) { return orbit_time_density(well, orb, th); };
    auto count = [&](double len) {
        return std::max(1, int(std::ceil(orb.panels * len / (0.5 * pi))));
    };
    const double left_end = std::min(theta, 0.0);
    double tau = 0.0;
    if (left_end > -0.5 * pi) {
        tau += gl_panels(g, -0.5 * pi, left_end, count(left_end + 0.5 * pi));
    }
    if (theta > 0.0) {
        tau += gl_panels(g, 0.0, theta, count(theta));
    }
    return tau;
}

double theta_of_time(const PotentialWell& well, const Orbit& orb, double tau)
{
    const double half = 0.5 * orb.period;
    if (!(tau >= -1e-12 * half && tau <= half * (1.0 + 1e-12))) {
        throw DomainError("phasemix::theta_of_time: time outside the half period");
    }
    tau = std::clamp(tau, 0.0, half);
    double a = -0.5 * pi;
    double b = 0.5 * pi;
    double th = -0.5 * pi + pi * tau / half;
    for (int it = 0; it < 100; ++it) {
        const double F = travel_time(well, orb, th) - tau;
        if (std::abs(F) <= 1e-15 * orb.period) {
            return th;
        }
        if (F < 0) {
            a = th;
        } else {
            b = th;
        }
        double next = th - F / orbit_time_density(well, orb, th);
        if (!(next > a && next < b)) {
            next = 0.5 * (a + b);
        }
        if (std::abs(next - th) <= 1e-16) {
            return next;
        }
        th = next;
    }
    return th;
}

double period(const PotentialWell& well, double h)
{
    return make_orbit(well, h).period;
}

double action(const PotentialWell& well, double h)
{
    return orbit_action(well, make_orbit(well, h));
}

// ---------------------------------------------------------------------------
// Chart

namespace {

struct ChartTable {
    PotentialWell well;
    std::vector<double> h;
    std::vector<double> I;
    std::vector<double> T;
};

struct SolvedAction {
    double h;
    double T;
};

// Hermite guess from the table, then Newton on action(h) = k.
template <typename Table>
SolvedAction solve_action(const Table& tab, double k)
{
    const double lo = tab.I.front();
    const double hi = tab.I.back();
    const double slack = 1e-12 * (hi - lo);
    if (!(k >= lo - slack && k <= hi + slack)) {
        throw DomainError("phasemix::h_of_action: action " + num(k) + " outside the chart");
    }
    k = std::clamp(k, lo, hi);
    const auto it = std::upper_bound(tab.I.begin(), tab.I.end(), k);
    std::size_t j = std::size_t(std::max<std::ptrdiff_t>(1, it - tab.I.begin()));
    j = std::min(j, tab.I.size() - 1);
    const double I0 = tab.I[j - 1];
    const double I1 = tab.I[j];
    const double w = I1 - I0;
    const double u = (k - I0) / w;
    const double m0 = two_pi / tab.T[j - 1] * w;
    const double m1 = two_pi / tab.T[j] * w;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    double h = h00 * tab.h[j - 1] + h10 * m0 + h01 * tab.h[j] + h11 * m1;
    double T = tab.T[j];
    const double scale = std::max(1.0, std::abs(h));
    for (int iter = 0; iter < 8; ++iter) {
        const Orbit orb = make_orbit(tab.well, h);
        T = orb.period;
        const double step = (orbit_action(tab.well, orb) - k) * two_pi / T;
        h -= step;
        if (std::abs(step) <= 1e-14 * scale) {
            return {h, T};
        }
    }
    throw NumericalFailure("phasemix::h_of_action: Newton iteration did not converge");
}

double table_frequency(const ChartTable& tab, double k)
{
    return two_pi / solve_action(tab, k).T;
}

// First derivative by central differences, one-sided at the box edges.
double fd_first(const std::function<double(double)>& f, double k, double lo, double hi, double del)
{
    if (k - del >= lo && k + del <= hi) {
        return (f(k + del) - f(k - del)) / (2 * del);
    }
    if (k - del < lo) {
        return (-3 * f(k) + 4 * f(k + del) - f(k + 2 * del)) / (2 * del);
    }
    return (3 * f(k) - 4 * f(k - del) + f(k - 2 * del)) / (2 * del);
}

double fd_second(const std::function<double(double)>& f, double k, double lo, double hi, double del)
{
    if (k - del >= lo && k + del <= hi) {
        return (f(k + del) - 2 * f(k) + f(k - del)) / (del * del);
    }
    const double s = k - del < lo ? del : -del;
    return (2 * f(k) - 5 * f(k + s) + 4 * f(k + 2 * s) - f(k + 3 * s)) / (del * del);
}

} // namespace

ActionAngleChart build_chart(const PotentialWell& well_in, int n_table_points, double padding)
{
    if (n_table_points < 64) {
        throw ConfigError("phasemix::build_chart: n_table_points must be at least 64");
    }
    auto tab = std::make_shared<ChartTable>();
    tab->well = validate_well(well_in);
    const auto& well = tab->well;
    const int n = n_table_points;
    for (int j = 0; j < n; ++j) {
        const double h = well.h_min + (well.h_max - well.h_min) * double(j) / (n - 1);
        const Orbit orb = make_orbit(well, h);
        tab->h.push_back(h);
        tab->T.push_back(orb.period);
        tab->I.push_back(orbit_action(well, orb));
    }
    for (int j = 1; j < n; ++j) {
        if (!(tab->I[j] > tab->I[j - 1])) {
            throw InvariantFailure("phasemix::build_chart: action table is not increasing");
        }
    }

    ActionAngleChart chart;
    chart.well = well;
    chart.h = tab->h;
    chart.I = tab->I;
    chart.T = tab->T;
    chart.n_table_points = n;

    const double lo = tab->I.front();
    const double hi = tab->I.back();
    const double width = hi - lo;
    FrequencyMap& fm = chart.omega;
    fm.domain = DomainBox::interval(lo, hi, padding);
    std::function<double(double)> w = [tab](double k) { return table_frequency(*tab, k); };
    fm.omega = [w](const Vec& k) { return vec1(w(k[0])); };
    fm.jac = [w, lo, hi, width](const Vec& k) {
        Mat J(1, 1);
        J(0, 0) = fd_first(w, k[0], lo, hi, 1e-4 * width);
        return J;
    };
    fm.hess = [w, lo, hi, width](const Vec& k) {
        Mat H(1, 1);
        H(0, 0) = fd_second(w, k[0], lo, hi, 1e-3 * width);
        return std::vector<Mat>{H};
    };

    // classify the frequency map on a coarse probe of the table
    constexpr int probes = 64;
    std::vector<double> ks;
    std::vector<double> d1;
    double max_d1 = 0.0;
    double max_w = 0.0;
    for (int i = 0; i <= probes; ++i) {
        const double k = lo + width * double(i) / probes;
        ks.push_back(k);
        d1.push_back(fm.jac(vec1(k))(0, 0));
        max_d1 = std::max(max_d1, std::abs(d1.back()));
        max_w = std::max(max_w, w(k));
    }
    if (max_d1 * width <= 1e-7 * max_w) {
        fm.degeneracy = Degeneracy::everywhere;
    } else {
        auto wp = [&fm](double k) { return fm.jac(vec1(k))(0, 0); };
        for (int i = 1; i <= probes; ++i) {
            if ((d1[i - 1] < 0) != (d1[i] < 0)) {
                fm.degenerate_points.push_back(vec1(bisect_root(wp, ks[i - 1], ks[i])));
            }
        }
        fm.degeneracy = fm.degenerate_points.empty() ? Degeneracy::none : Degeneracy::isolated;
    }
    return chart;
}

double ActionAngleChart::action_of_h(double energy) const
{
    if (!(energy >= well.h_min && energy <= well.h_max)) {
        throw DomainError("phasemix::action_of_h: energy " + num(energy) + " outside h_range");
    }
    return action(well, energy);
}

double ActionAngleChart::h_of_action(double k) const
{
    return solve_action(*this, k).h;
}

double ActionAngleChart::period(double energy) const
{
    if (!(energy >= well.h_min && energy <= well.h_max)) {
        throw DomainError("phasemix::period: energy " + num(energy) + " outside h_range");
    }
    return phasemix::period(well, energy);
}

double ActionAngleChart::frequency(double k) const
{
    return omega.omega(vec1(k))[0];
}

PhasePoint to_physical(const ActionAngleChart& chart, double q, double k)
{
    if (!(q >= 0.0 && q <= two_pi)) {
        throw DomainError("phasemix::to_physical: angle outside [0, 2pi]");
    }
    const double h = chart.h_of_action(k);
    const Orbit orb = make_orbit(chart.well, h);
    const bool upper = q <= pi;
    const double qq = upper ? q : two_pi - q;
    const double th = theta_of_time(chart.well, orb, qq * orb.period / two_pi);
    PhasePoint pt;
    pt.x = orb.c + orb.r * std::sin(th);
    const double mom = orbit_momentum(chart.well, orb, th);
    pt.p = upper ? mom : -mom;
    return pt;
}

AnglePoint from_physical(const ActionAngleChart& chart, double x, double p)
{
    const auto& well = chart.well;
    const double h = hamiltonian(well, x, p);
    if (!(h >= well.h_min && h <= well.h_max)) {
        throw DomainError("phasemix::from_physical: energy " + num(h) + " outside h_range");
    }
    const Orbit orb = make_orbit(well, h);
    const double s = std::clamp((x - orb.c) / orb.r, -1.0, 1.0);
    const double tau = travel_time(well, orb, std::asin(s));
    const double w = two_pi / orb.period;
    AnglePoint out;
    out.k = orbit_action(well, orb);
    out.q = wrap_angle(p >= 0.0 ? w * tau : two_pi - w * tau);
    return out;
}

void write_csv(std::ostream& os, const ActionAngleChart& chart)
{
    write_csv_row(os, {"h", "I", "T", "omega"});
    for (std::size_t j = 0; j < chart.h.size(); ++j) {
        write_csv_row(os, {format_double(chart.h[j]), format_double(chart.I[j]),
                           format_double(chart.T[j]), format_double(two_pi / chart.T[j])});
    }
}

} // namespace phasemix

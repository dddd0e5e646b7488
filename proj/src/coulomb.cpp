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
#include "phasemix/coulomb.hpp"

#include "phasemix/csv.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace phasemix {

namespace {

constexpr int coarse_order = 16;
constexpr int theta_order = 16;
constexpr int fine_order = 10;

std::string num(double v)
{
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

const std::vector<double>& reference_bary()
{
    static const std::vector<double> w = [] {
        const auto& gl = gauss_legendre(coarse_order);
        return barycentric_weights(gl.nodes);
    }();
    return w;
}

// Lagrange basis values at u on the reference GL nodes.
void bary_row(double u, double* row)
{
    const auto& gl = gauss_legendre(coarse_order);
    const auto& w = reference_bary();
    double den = 0.0;
    for (int j = 0; j < coarse_order; ++j) {
        const double diff = u - gl.nodes[j];
        if (diff == 0.0) {
            for (int l = 0; l < coarse_order; ++l) {
                row[l] = l == j ? 1.0 : 0.0;
            }
            return;
        }
        row[j] = w[j] / diff;
        den += row[j];
    }
    for (int j = 0; j < coarse_order; ++j) {
        row[j] /= den;
    }
}

// S(i, j) = integral from -1 to x_i of the j-th Lagrange basis polynomial.
const std::vector<double>& integration_matrix()
{
    static const std::vector<double> S = [] {
        const auto& gl = gauss_legendre(theta_order);
        const int n = theta_order;
        std::vector<double> out(std::size_t(n * n), 0.0);
        std::vector<double> row(n);
        for (int i = 0; i < n; ++i) {
            const double half = 0.5 * (gl.nodes[i] + 1.0);
            for (int l = 0; l < n; ++l) {
                const double y = -1.0 + half * (1.0 + gl.nodes[l]);
                bary_row(y, row.data());
                for (int j = 0; j < n; ++j) {
                    out[std::size_t(i * n + j)] += half * gl.weights[l] * row[j];
                }
            }
        }
        return out;
    }();
    return S;
}

double bisect(const std::function<double(double)>& f, double a, double b)
{
    double fa = f(a);
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) {
            break;
        }
        const double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

// Local extrema of H on a circle, found by sampling and golden-section refinement.
std::vector<double> circle_energy_extrema(const PotentialWell& well, const PhaseCircle& c)
{
    auto H = [&](double a) {
        return hamiltonian(well, c.x + c.radius * std::cos(a), c.p + c.radius * std::sin(a));
    };
    constexpr int n = 2048;
    std::vector<double> hs(n);
    for (int i = 0; i < n; ++i) {
        hs[std::size_t(i)] = H(two_pi * i / n);
    }
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        const double l = hs[std::size_t((i + n - 1) % n)];
        const double m = hs[std::size_t(i)];
        const double r = hs[std::size_t((i + 1) % n)];
        const bool is_min = m <= l && m < r;
        const bool is_max = m >= l && m > r;
        if (!is_min && !is_max) {
            continue;
        }
        const double sgn = is_min ? 1.0 : -1.0;
        double a = two_pi * (i - 1) / n;
        double b = two_pi * (i + 1) / n;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - g * (b - a);
        double x2 = a + g * (b - a);
        double f1 = sgn * H(x1);
        double f2 = sgn * H(x2);
        for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = sgn * H(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = sgn * H(x2);
            }
        }
        out.push_back(H(0.5 * (a + b)));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Central differences in k for fields defined through the chart.
std::function<Vec(const Vec&, const Vec&)> fd_grad(std::function<double(const Vec&, const Vec&)> value,
                                                   double del)
{
    return [value, del](const Vec& q, const Vec& k) {
        Vec kp = k;
        Vec km = k;
        kp[0] += del;
        km[0] -= del;
        return vec1((value(q, kp) - value(q, km)) / (2.0 * del));
    };
}

struct ThetaNode {
    double theta;
    double weight;  // dtheta weight times dt/dtheta
    double tau;
};

// Half-orbit nodes with travel times, split at the given theta breaks.
std::vector<ThetaNode> theta_nodes(const PotentialWell& well, const Orbit& orb,
                                   std::vector<double> breaks, double max_len, double* half_time)
{
    breaks.push_back(-0.5 * pi);
    breaks.push_back(0.0);
    breaks.push_back(0.5 * pi);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> b;
    for (double x : breaks) {
        x = std::clamp(x, -0.5 * pi, 0.5 * pi);
        if (b.empty() || x - b.back() > 1e-13) {
            b.push_back(x);
        }
    }
    b.back() = 0.5 * pi;
    const auto& gl = gauss_legendre(theta_order);
    const auto& S = integration_matrix();
    std::vector<ThetaNode> out;
    double tau = 0.0;
    double g[theta_order];
    for (std::size_t p = 0; p + 1 < b.size(); ++p) {
        const int sub = std::max(1, int(std::ceil((b[p + 1] - b[p]) / max_len)));
        const double len = (b[p + 1] - b[p]) / sub;
        for (int s = 0; s < sub; ++s) {
            const double a = b[p] + s * len;
            const double hw = 0.5 * len;
            for (int i = 0; i < theta_order; ++i) {
                g[i] = orbit_time_density(well, orb, a + hw * (1.0 + gl.nodes[i]));
            }
            double total = 0.0;
            for (int i = 0; i < theta_order; ++i) {
                double acc = 0.0;
                for (int j = 0; j < theta_order; ++j) {
                    acc += S[std::size_t(i * theta_order + j)] * g[j];
                }
                out.push_back({a + hw * (1.0 + gl.nodes[i]), hw * gl.weights[i] * g[i], tau + hw * acc});
                total += gl.weights[i] * g[i];
            }
            tau += hw * total;
        }
    }
    *half_time = tau;
    return out;
}

struct OrbitSpectrum {
    // fhat[m], m = 0..modes
    std::vector<Complex> fhat;
    // khat[m * nx + x]
    std::vector<double> khat;
};

OrbitSpectrum orbit_spectrum(const PhysicalDensity& dens, double k, const std::vector<double>& x0,
                             int modes, double theta_panel)
{
    const auto& well = dens.chart->well;
    const double h = dens.chart->h_of_action(k);
    const Orbit orb = make_orbit(well, h);
    const std::size_t nx = x0.size();

    std::vector<double> breaks;
    auto add_x = [&](double x) {
        if (x > orb.x_minus && x < orb.x_plus) {
            breaks.push_back(std::asin(std::clamp((x - orb.c) / orb.r, -1.0, 1.0)));
        }
    };
    for (double x : x0) {
        add_x(x);
    }
    add_x(0.0);
    for (const auto& c : dens.kinks) {
        for (double sign : {1.0, -1.0}) {
            auto f = [&](double th) {
                const double x = orb.c + orb.r * std::sin(th);
                const double p = sign * orbit_momentum(well, orb, th);
                return (x - c.x) * (x - c.x) + (p - c.p) * (p - c.p) - c.radius * c.radius;
            };
            constexpr int n = 96;
            double prev_t = -0.5 * pi;
            double prev = f(prev_t);
            for (int i = 1; i <= n; ++i) {
                const double th = -0.5 * pi + pi * i / n;
                const double v = f(th);
                if ((v < 0) != (prev < 0)) {
                    breaks.push_back(bisect(f, prev_t, th));
                }
                prev_t = th;
                prev = v;
            }
        }
    }

    double half = 0.0;
    const auto nodes = theta_nodes(well, orb, breaks, theta_panel, &half);

    OrbitSpectrum out;
    out.fhat.assign(std::size_t(modes + 1), Complex(0.0, 0.0));
    std::vector<double> fu(nodes.size());
    std::vector<double> fl(nodes.size());
    std::vector<Complex> rot(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        const double x = orb.c + orb.r * std::sin(nd.theta);
        const double p = orbit_momentum(well, orb, nd.theta);
        const double base = nd.weight / (2.0 * half);
        fu[i] = base * dens.F0(x, p);
        fl[i] = base * dens.F0(x, -p);
        rot[i] = std::polar(1.0, -pi * nd.tau / half);
    }
    const Eigen::Index n = Eigen::Index(nodes.size());
    Eigen::MatrixXd Cc(n, modes + 1);
    Eigen::MatrixXd Cs(n, modes + 1);
    Eigen::MatrixXd K(Eigen::Index(nx), n);
    Eigen::VectorXd fe(n);
    Eigen::VectorXd fo(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& nd = nodes[std::size_t(i)];
        Complex e(1.0, 0.0);
        for (int m = 0; m <= modes; ++m) {
            // e = exp(-i m q)
            Cc(i, m) = e.real();
            Cs(i, m) = -e.imag();
            e *= rot[std::size_t(i)];
        }
        fe[i] = fu[std::size_t(i)] + fl[std::size_t(i)];
        fo[i] = fu[std::size_t(i)] - fl[std::size_t(i)];
        const double x = orb.c + orb.r * std::sin(nd.theta);
        const double base = nd.weight / half;
        for (std::size_t j = 0; j < nx; ++j) {
            K(Eigen::Index(j), i) = base * kernel_value_1d(x, x0[j]);
        }
    }
    const Eigen::VectorXd re = Cc.transpose() * fe;
    const Eigen::VectorXd im = Cs.transpose() * fo;
    for (int m = 0; m <= modes; ++m) {
        out.fhat[std::size_t(m)] = Complex(re[m], -im[m]);
    }
    const Eigen::MatrixXd kh = K * Cc;
    out.khat.assign(kh.data(), kh.data() + kh.size());
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Kernel

double kernel_value_1d(double x0, double x)
{
    return (x <= x0 ? x - x0 : 0.0) + std::max(0.0, x0);
}

double kernel_value(const CoulombKernel& kern, const Vec& x)
{
    if (kern.d < 1 || kern.d > 3 || kern.x0.size() != kern.d || x.size() != kern.d) {
        throw ConfigError("phasemix::kernel_value: dimension must be 1, 2 or 3 with matching points");
    }
    if (kern.d == 1) {
        return kernel_value_1d(kern.x0[0], x[0]);
    }
    const double r = (x - kern.x0).norm();
    if (r == 0.0) {
        throw DomainError("phasemix::kernel_value: kernel is singular at its pole");
    }
    if (kern.d == 2) {
        return -std::log(r) / two_pi;
    }
    return 1.0 / (4.0 * pi * r);
}

// ---------------------------------------------------------------------------
// Densities

PhysicalDensity gaussian_density(std::shared_ptr<const ActionAngleChart> chart, double x, double p,
                                 double sigma, double radius, std::string label)
{
    if (!chart) {
        throw ConfigError("phasemix::gaussian_density: chart is required");
    }
    if (!(sigma > 0.0) || !(radius > 0.0)) {
        throw ConfigError("phasemix::gaussian_density: sigma and radius must be positive");
    }
    const auto& well = chart->well;
    if (std::hypot(x - well.x_min, p) <= radius) {
        throw ConfigError("phasemix::gaussian_density: support contains the bottom of the well");
    }
    PhysicalDensity d;
    d.chart = chart;
    d.label = std::move(label);
    d.F0 = [x, p, sigma, radius](double xx, double pp) {
        const double r2 = (xx - x) * (xx - x) + (pp - p) * (pp - p);
        const double r = std::sqrt(r2);
        if (r >= radius) {
            return 0.0;
        }
        return std::exp(-0.5 * r2 / (sigma * sigma)) * profiles::cutoff(r / radius);
    };
    d.kinks = {{x, p, 0.5 * radius}, {x, p, radius}};
    const auto outer = circle_energy_extrema(well, d.kinks.back());
    d.h_lo = outer.front();
    d.h_hi = outer.back();
    if (!(d.h_lo > well.h_min && d.h_hi < well.h_max)) {
        throw ConfigError("phasemix::gaussian_density: support energies [" + num(d.h_lo) + ", " +
                          num(d.h_hi) + "] leave the chart");
    }
    for (const auto& c : d.kinks) {
        for (double h : circle_energy_extrema(well, c)) {
            if (h > d.h_lo && h < d.h_hi) {
                d.h_knots.push_back(h);
            }
        }
    }
    std::sort(d.h_knots.begin(), d.h_knots.end());

    const double k_lo = chart->action_of_h(d.h_lo);
    const double k_hi = chart->action_of_h(d.h_hi);
    const DomainBox domain = chart->omega.domain;
    const auto F0 = d.F0;
    std::function<double(const Vec&, const Vec&)> value = [chart, F0, k_lo, k_hi](const Vec& q,
                                                                               const Vec& k) {
        if (k[0] <= k_lo || k[0] >= k_hi) {
            return 0.0;
        }
        const PhasePoint pt = to_physical(*chart, wrap_angle(q[0]), k[0]);
        return F0(pt.x, pt.p);
    };
    std::vector<double> knots;
    for (double h : d.h_knots) {
        knots.push_back(chart->action_of_h(h));
    }
    d.f0 = make_general_field(domain, DomainBox::interval(k_lo, k_hi), value,
                              fd_grad(value, 1e-6 * (k_hi - k_lo)), true, {knots});
    return d;
}

PhysicalDensity energy_density(std::shared_ptr<const ActionAngleChart> chart,
                               std::function<double(double)> psi, double h_lo, double h_hi,
                               std::string label)
{
    if (!chart) {
        throw ConfigError("phasemix::energy_density: chart is required");
    }
    const auto& well = chart->well;
    if (!(h_lo > well.h_min && h_hi < well.h_max && h_lo < h_hi)) {
        throw ConfigError("phasemix::energy_density: energy band must lie inside the chart");
    }
    PhysicalDensity d;
    d.chart = chart;
    d.label = std::move(label);
    d.h_lo = h_lo;
    d.h_hi = h_hi;
    const PotentialWell w = well;
    d.F0 = [w, psi](double x, double p) { return psi(hamiltonian(w, x, p)); };
    const double k_lo = chart->action_of_h(h_lo);
    const double k_hi = chart->action_of_h(h_hi);
    std::function<double(const Vec&, const Vec&)> value = [chart, psi, k_lo, k_hi](const Vec&,
                                                                                const Vec& k) {
        if (k[0] <= k_lo || k[0] >= k_hi) {
            return 0.0;
        }
        return psi(chart->h_of_action(k[0]));
    };
    d.f0 = make_general_field(chart->omega.domain, DomainBox::interval(k_lo, k_hi), value,
                              fd_grad(value, 1e-6 * (k_hi - k_lo)), true);
    return d;
}

// ---------------------------------------------------------------------------
// Evaluator

namespace {

// j_n(z) for n = 0..nmax, real z.
void spherical_bessel(int nmax, double z, double* out)
{
    const double az = std::abs(z);
    if (az < 1e-3) {
        // leading terms of the series
        double lead = 1.0;
        for (int n = 0; n <= nmax; ++n) {
            if (n > 0) {
                lead *= az / (2 * n + 1);
            }
            out[n] = lead * (1.0 - az * az / (2.0 * (2 * n + 3)));
        }
    } else if (az > nmax) {
        out[0] = std::sin(az) / az;
        if (nmax > 0) {
            out[1] = std::sin(az) / (az * az) - std::cos(az) / az;
        }
        for (int n = 1; n < nmax; ++n) {
            out[n + 1] = (2 * n + 1) / az * out[n] - out[n - 1];
        }
    } else {
        // Miller's backward recurrence
        const int start = nmax + 20 + int(az);
        double jp = 0.0;
        double j = 1e-280;
        std::vector<double> tmp(std::size_t(start + 1), 0.0);
        for (int n = start; n >= 0; --n) {
            tmp[std::size_t(n)] = j;
            const double jm = (2 * n + 1) / az * j - jp;
            jp = j;
            j = jm;
        }
        const double j0 = std::sin(az) / az;
        const double j1 = std::sin(az) / (az * az) - std::cos(az) / az;
        const double scale = std::abs(j0) >= std::abs(j1) ? j0 / tmp[0] : j1 / tmp[1];
        for (int n = 0; n <= nmax; ++n) {
            out[n] = tmp[std::size_t(n)] * scale;
        }
    }
    if (z < 0) {
        for (int n = 1; n <= nmax; n += 2) {
            out[n] = -out[n];
        }
    }
}

// P_n at the reference GL nodes, legendre_table()[i * order + n].
const std::vector<double>& legendre_table()
{
    static const std::vector<double> P = [] {
        const auto& gl = gauss_legendre(coarse_order);
        std::vector<double> out(std::size_t(coarse_order * coarse_order));
        for (int i = 0; i < coarse_order; ++i) {
            const double x = gl.nodes[std::size_t(i)];
            double p0 = 1.0;
            double p1 = x;
            out[std::size_t(i * coarse_order)] = 1.0;
            out[std::size_t(i * coarse_order + 1)] = x;
            for (int n = 1; n + 1 < coarse_order; ++n) {
                const double p2 = ((2 * n + 1) * x * p1 - n * p0) / (n + 1);
                out[std::size_t(i * coarse_order + n + 1)] = p2;
                p0 = p1;
                p1 = p2;
            }
        }
        return out;
    }();
    return P;
}

// Derivative of the interpolant at the reference nodes: D(i, j) = l_j'(x_i).
const std::vector<double>& differentiation_matrix()
{
    static const std::vector<double> D = [] {
        const auto& gl = gauss_legendre(coarse_order);
        const auto& w = reference_bary();
        std::vector<double> out(std::size_t(coarse_order * coarse_order), 0.0);
        for (int i = 0; i < coarse_order; ++i) {
            double diag = 0.0;
            for (int j = 0; j < coarse_order; ++j) {
                if (i != j) {
                    const double v = (w[std::size_t(j)] / w[std::size_t(i)]) /
                                     (gl.nodes[std::size_t(i)] - gl.nodes[std::size_t(j)]);
                    out[std::size_t(i * coarse_order + j)] = v;
                    diag -= v;
                }
            }
            out[std::size_t(i * coarse_order + i)] = diag;
        }
        return out;
    }();
    return D;
}

} // namespace

CoulombEvaluator::CoulombEvaluator(const PhysicalDensity& dens, const FrequencyMap& freq,
                                   std::vector<double> x0, const CoulombOptions& opts)
    : x0_(std::move(x0)), modes_(opts.modes), c_osc_(opts.c_osc)
{
    if (!dens.chart || !dens.F0) {
        throw ConfigError("phasemix::CoulombEvaluator: density needs a chart and a physical form");
    }
    if (freq.dim() != 1) {
        throw PreconditionError("phasemix::CoulombEvaluator: the kernel pairing is one-dimensional");
    }
    if (x0_.empty() || opts.modes < 1 || !(opts.amplitude_tol > 0) || !(opts.tail_tol > 0) ||
        !(opts.c_osc > 0) || !(opts.theta_panel > 0)) {
        throw ConfigError("phasemix::CoulombEvaluator: invalid options or empty field grid");
    }
    const auto& chart = *dens.chart;
    const std::size_t nx = x0_.size();
    const int M = modes_;
    const double k_lo = chart.action_of_h(dens.h_lo);
    const double k_hi = chart.action_of_h(dens.h_hi);
    const double width = k_hi - k_lo;

    // theta resolution, checked on a few orbits against a halved panel length
    double theta_panel = opts.theta_panel;
    double theta_err = 0.0;
    for (int attempt = 0;; ++attempt) {
        theta_err = 0.0;
        for (double u : {0.2, 0.5, 0.8}) {
            const double k = k_lo + u * width;
            const auto a = orbit_spectrum(dens, k, x0_, M, theta_panel);
            const auto b = orbit_spectrum(dens, k, x0_, M, 0.5 * theta_panel);
            for (std::size_t x = 0; x < nx; ++x) {
                double e = 0.0;
                for (int m = 0; m <= M; ++m) {
                    const Complex Aa = a.fhat[std::size_t(m)] * a.khat[std::size_t(m) * nx + x];
                    const Complex Ab = b.fhat[std::size_t(m)] * b.khat[std::size_t(m) * nx + x];
                    e += 4.0 * pi * std::abs(Aa - Ab);
                }
                theta_err = std::max(theta_err, e);
            }
        }
        if (theta_err <= opts.amplitude_tol) {
            break;
        }
        if (attempt == 4) {
            throw NumericalFailure("phasemix::CoulombEvaluator: orbit quadrature did not converge",
                                   theta_err);
        }
        theta_panel *= 0.5;
    }

    std::vector<double> knots = {k_lo, k_hi};
    auto add_energy = [&](double h) {
        if (h > dens.h_lo && h < dens.h_hi) {
            knots.push_back(chart.action_of_h(h));
        }
    };
    for (double h : dens.h_knots) {
        add_energy(h);
    }
    for (double x : x0_) {
        if (x > chart.well.x_lo && x < chart.well.x_hi) {
            add_energy(chart.well.V(x));
        }
    }
    add_energy(chart.well.V(0.0));
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end(),
                            [&](double a, double b) { return b - a <= 1e-12 * width; }),
                knots.end());

    std::vector<std::pair<double, double>> todo;
    for (std::size_t i = knots.size() - 1; i >= 1; --i) {
        const auto br = graded_breaks(knots[i - 1], knots[i], 1, true, true, 3);
        for (std::size_t j = br.size() - 1; j >= 1; --j) {
            todo.emplace_back(br[j - 1], br[j]);
        }
    }

    const auto& gl = gauss_legendre(coarse_order);
    const double checks[3] = {-0.97, 0.05, 0.93};
    limit_.assign(nx, Estimate{0.0, 0.0});
    static_err_.assign(nx, 0.0);
    std::vector<double> limit_abs(nx, 0.0);
    double top_amp = 0.0;
    double row[coarse_order];

    while (!todo.empty()) {
        const auto [a, b] = todo.back();
        todo.pop_back();
        const double hw = 0.5 * (b - a);
        std::vector<OrbitSpectrum> spec(coarse_order + 3);
        std::vector<double> pts(coarse_order + 3);
        for (int j = 0; j < coarse_order; ++j) {
            pts[std::size_t(j)] = a + hw * (1.0 + gl.nodes[std::size_t(j)]);
        }
        for (int c = 0; c < 3; ++c) {
            pts[std::size_t(coarse_order + c)] = a + hw * (1.0 + checks[c]);
        }
        parallel_for(pts.size(), [&](std::size_t j) {
            spec[j] = orbit_spectrum(dens, pts[j], x0_, M, theta_panel);
        });
        // interpolation check against exact spectra at interior points
        std::vector<double> perr(nx, 0.0);
        double worst = 0.0;
        for (int c = 0; c < 3; ++c) {
            const auto& ex = spec[std::size_t(coarse_order + c)];
            bary_row(checks[c], row);
            for (std::size_t x = 0; x < nx; ++x) {
                double sum_err = 0.0;
                for (int m = 0; m <= M; ++m) {
                    Complex ip(0.0, 0.0);
                    for (int j = 0; j < coarse_order; ++j) {
                        ip += row[j] * spec[std::size_t(j)].fhat[std::size_t(m)] *
                              spec[std::size_t(j)].khat[std::size_t(m) * nx + x];
                    }
                    const Complex exact = ex.fhat[std::size_t(m)] * ex.khat[std::size_t(m) * nx + x];
                    sum_err += 4.0 * pi * std::abs(ip - exact);
                }
                perr[x] = std::max(perr[x], sum_err);
                worst = std::max(worst, sum_err);
            }
        }
        if (worst > opts.amplitude_tol && (b - a) > 1e-9 * width) {
            const double mid = 0.5 * (a + b);
            todo.emplace_back(mid, b);
            todo.emplace_back(a, mid);
            continue;
        }
        Panel pan;
        pan.a = a;
        pan.b = b;
        pan.omega.resize(coarse_order);
        for (int j = 0; j < coarse_order; ++j) {
            pan.omega[std::size_t(j)] = freq.omega(vec1(pts[std::size_t(j)]))[0];
        }
        pan.amp.assign(std::size_t(coarse_order) * nx * std::size_t(M), Complex(0.0, 0.0));
        for (int j = 0; j < coarse_order; ++j) {
            const auto& sp = spec[std::size_t(j)];
            const double w = hw * gl.weights[std::size_t(j)];
            for (std::size_t x = 0; x < nx; ++x) {
                const double v = two_pi * sp.fhat[0].real() * sp.khat[x];
                limit_[x].value += w * v;
                limit_abs[x] += std::abs(w * v);
                for (int m = 1; m <= M; ++m) {
                    const Complex A =
                        4.0 * pi * sp.fhat[std::size_t(m)] * sp.khat[std::size_t(m) * nx + x];
                    pan.amp[(std::size_t(j) * nx + x) * std::size_t(M) + std::size_t(m - 1)] = A;
                    if (std::abs(A) > 0.0) {
                        pan.top_mode = std::max(pan.top_mode, m);
                    }
                }
                top_amp = std::max(top_amp, std::abs(4.0 * pi * sp.fhat[std::size_t(M)] *
                                                     sp.khat[std::size_t(M) * nx + x]));
            }
        }
        for (std::size_t x = 0; x < nx; ++x) {
            static_err_[x] += (b - a) * perr[x];
        }
        expand_in_omega(pan);
        panels_.push_back(std::move(pan));
    }
    // amplitudes fall off at least like m^-4 past the top mode
    tail_ = width * top_amp * M / 3.0;
    if (tail_ > opts.tail_tol) {
        throw NumericalFailure("phasemix::CoulombEvaluator: mode series not converged at the top mode",
                               tail_);
    }
    for (auto& pan : panels_) {
        // Legendre truncation: the two highest coefficients bound the remainder
        if (!pan.monotone) {
            continue;
        }
        for (std::size_t x = 0; x < nx; ++x) {
            double e = 0.0;
            for (int m = 1; m <= pan.top_mode; ++m) {
                const Complex* c = &pan.leg[(std::size_t(m - 1) * nx + x) * coarse_order];
                e += std::abs(c[coarse_order - 1]) + std::abs(c[coarse_order - 2]);
            }
            static_err_[x] += 2.0 * std::abs(pan.u_half) * e;
        }
    }
    for (std::size_t x = 0; x < nx; ++x) {
        static_err_[x] += width * theta_err + tail_;
        limit_[x].err = static_err_[x] + 64.0 * 2.2e-16 * limit_abs[x];
    }
}

void CoulombEvaluator::expand_in_omega(Panel& pan)
{
    const std::size_t nx = x0_.size();
    const std::size_t M = std::size_t(modes_);
    const auto& D = differentiation_matrix();
    const auto& gl = gauss_legendre(coarse_order);
    const double hw = 0.5 * (pan.b - pan.a);
    // d omega / d s on the reference panel
    double dw[coarse_order];
    for (int i = 0; i < coarse_order; ++i) {
        double s = 0.0;
        for (int j = 0; j < coarse_order; ++j) {
            s += D[std::size_t(i * coarse_order + j)] * pan.omega[std::size_t(j)];
        }
        dw[i] = s;
    }
    double lo = dw[0];
    double hi = dw[0];
    for (double v : dw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double row[coarse_order];
    auto interp = [&](const double* vals, double s) {
        bary_row(s, row);
        double v = 0.0;
        for (int j = 0; j < coarse_order; ++j) {
            v += row[j] * vals[j];
        }
        return v;
    };
    const double u_a = interp(pan.omega.data(), -1.0);
    const double u_b = interp(pan.omega.data(), 1.0);
    const double scale = std::max(std::abs(u_a), std::abs(u_b));
    if (!(lo * hi > 0.0) || std::min(std::abs(lo), std::abs(hi)) < 1e-3 * std::max(std::abs(lo), std::abs(hi)) ||
        std::abs(u_b - u_a) <= 1e-10 * scale) {
        pan.monotone = false;
        return;
    }
    pan.monotone = true;
    pan.u_mid = 0.5 * (u_a + u_b);
    pan.u_half = 0.5 * (u_b - u_a);
    // nodes in omega, pulled back to the panel by Newton on the interpolant
    std::vector<double> rows(std::size_t(coarse_order * coarse_order));
    std::vector<double> jac(coarse_order);
    for (int i = 0; i < coarse_order; ++i) {
        const double target = pan.u_mid + pan.u_half * gl.nodes[std::size_t(i)];
        double s = gl.nodes[std::size_t(i)];
        for (int it = 0; it < 50; ++it) {
            const double f = interp(pan.omega.data(), s) - target;
            const double step = f / interp(dw, s);
            s = std::clamp(s - step, -1.0, 1.0);
            if (std::abs(step) < 1e-15) {
                break;
            }
        }
        bary_row(s, &rows[std::size_t(i * coarse_order)]);
        // dk / du = hw / (d omega / ds)
        jac[std::size_t(i)] = hw / interp(dw, s);
    }
    const auto& P = legendre_table();
    pan.leg.assign(M * nx * std::size_t(coarse_order), Complex(0.0, 0.0));
    for (int m = 1; m <= pan.top_mode; ++m) {
        for (std::size_t x = 0; x < nx; ++x) {
            Complex* c = &pan.leg[(std::size_t(m - 1) * nx + x) * coarse_order];
            for (int i = 0; i < coarse_order; ++i) {
                Complex A(0.0, 0.0);
                const double* r = &rows[std::size_t(i * coarse_order)];
                for (int j = 0; j < coarse_order; ++j) {
                    A += r[j] * pan.amp[(std::size_t(j) * nx + x) * M + std::size_t(m - 1)];
                }
                const Complex B = A * jac[std::size_t(i)] * gl.weights[std::size_t(i)];
                for (int n = 0; n < coarse_order; ++n) {
                    c[n] += B * P[std::size_t(i * coarse_order + n)];
                }
            }
            for (int n = 0; n < coarse_order; ++n) {
                c[n] *= 0.5 * (2 * n + 1);
            }
        }
    }
}

void CoulombEvaluator::fine_panel(const Panel& pan, double t, std::vector<Complex>& lev1,
                                  std::vector<Complex>& lev2, std::vector<double>& abs_sum) const
{
    const std::size_t nx = x0_.size();
    const std::size_t M = std::size_t(modes_);
    const auto& gl = gauss_legendre(fine_order);
    std::vector<Complex> E(coarse_order);
    double row[coarse_order];
    const double hw = 0.5 * (pan.b - pan.a);

    auto level = [&](int m, int sub, std::vector<Complex>& acc, bool track) {
        std::fill(E.begin(), E.end(), Complex(0.0, 0.0));
        const double len = 2.0 / sub;
        for (int s = 0; s < sub; ++s) {
            const double lo = -1.0 + s * len;
            for (int i = 0; i < fine_order; ++i) {
                const double u = lo + 0.5 * len * (1.0 + gl.nodes[std::size_t(i)]);
                bary_row(u, row);
                double w = 0.0;
                for (int j = 0; j < coarse_order; ++j) {
                    w += row[j] * pan.omega[std::size_t(j)];
                }
                const Complex ph =
                    std::polar(0.5 * len * gl.weights[std::size_t(i)], -double(m) * w * t);
                for (int j = 0; j < coarse_order; ++j) {
                    E[std::size_t(j)] += ph * row[j];
                }
            }
        }
        for (std::size_t x = 0; x < nx; ++x) {
            Complex s(0.0, 0.0);
            double sa = 0.0;
            for (int j = 0; j < coarse_order; ++j) {
                const Complex A = pan.amp[(std::size_t(j) * nx + x) * M + std::size_t(m - 1)];
                s += A * E[std::size_t(j)];
                sa += std::abs(A) * std::abs(E[std::size_t(j)]);
            }
            acc[x] += hw * s;
            if (track) {
                abs_sum[x] += hw * sa;
            }
        }
    };

    double wmin = pan.omega[0];
    double wmax = pan.omega[0];
    for (double w : pan.omega) {
        wmin = std::min(wmin, w);
        wmax = std::max(wmax, w);
    }
    for (int m = 1; m <= pan.top_mode; ++m) {
        const double phase = double(m) * std::abs(t) * (wmax - wmin);
        const int sub = std::max(1, int(std::ceil(c_osc_ * (1.0 + phase / two_pi))));
        level(m, sub, lev1, false);
        level(m, 2 * sub, lev2, true);
    }
}

std::vector<Estimate> CoulombEvaluator::deviation(double t, CoulombScheme scheme) const
{
    const std::size_t nx = x0_.size();
    std::vector<Complex> lev1(nx, Complex(0.0, 0.0));
    std::vector<Complex> lev2(nx, Complex(0.0, 0.0));
    std::vector<double> abs_sum(nx, 0.0);
    double jn[coarse_order];
    Complex sn[coarse_order];
    for (const auto& pan : panels_) {
        if (scheme == CoulombScheme::fine_quadrature || !pan.monotone) {
            fine_panel(pan, t, lev1, lev2, abs_sum);
            continue;
        }
        for (int m = 1; m <= pan.top_mode; ++m) {
            const double mu = double(m) * t;
            spherical_bessel(coarse_order - 1, mu * pan.u_half, jn);
            // integral of P_n(s) exp(-i mu (u_mid + u_half s)) over [-1, 1]
            const Complex carrier = std::polar(2.0 * pan.u_half, -mu * pan.u_mid);
            Complex ipow(1.0, 0.0);
            for (int n = 0; n < coarse_order; ++n) {
                sn[n] = carrier * ipow * jn[n];
                ipow *= Complex(0.0, -1.0);
            }
            for (std::size_t x = 0; x < nx; ++x) {
                const Complex* c = &pan.leg[(std::size_t(m - 1) * nx + x) * coarse_order];
                Complex s(0.0, 0.0);
                double sa = 0.0;
                for (int n = 0; n < coarse_order; ++n) {
                    const Complex term = c[n] * sn[n];
                    s += term;
                    sa += std::abs(term);
                }
                lev2[x] += s;
                lev1[x] += s;
                abs_sum[x] += sa;
            }
        }
    }
    std::vector<Estimate> out(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        out[x].value = lev2[x].real();
        out[x].err = std::abs(lev2[x].real() - lev1[x].real()) + static_err_[x] +
                     64.0 * 2.2e-16 * abs_sum[x];
    }
    return out;
}

std::vector<Estimate> CoulombEvaluator::potential(double t) const
{
    auto dev = deviation(t);
    for (std::size_t x = 0; x < dev.size(); ++x) {
        dev[x].value += limit_[x].value;
        dev[x].err += limit_[x].err;
    }
    return dev;
}

double coulomb_potential(const PhysicalDensity& dens, const FrequencyMap& freq, double t, double x0)
{
    const CoulombEvaluator ev(dens, freq, {x0});
    return ev.potential(t)[0].value;
}

CoulombSeries coulomb_deviation(const PhysicalDensity& dens, const FrequencyMap& freq,
                                const std::vector<double>& times, const std::vector<double>& x0_grid,
                                const CoulombOptions& opts)
{
    if (!dens.chart) {
        throw ConfigError("phasemix::coulomb_deviation: density needs a chart");
    }
    const double k_lo = dens.chart->action_of_h(dens.h_lo);
    const double k_hi = dens.chart->action_of_h(dens.h_hi);
    const auto nd = check_nondegeneracy(freq, 65, DomainBox::interval(k_lo, k_hi));
    if (nd.degenerate) {
        throw DegeneracyError("phasemix::coulomb_deviation: frequencies are degenerate on the support");
    }
    const CoulombEvaluator ev(dens, freq, x0_grid, opts);
    CoulombSeries out;
    out.x0 = x0_grid;
    out.series.times = times;
    out.series.limit = 0.0;
    out.series.method = Method::spectral;
    out.series.values.assign(times.size(), 0.0);
    out.series.errors.assign(times.size(), 0.0);
    out.per_x0.assign(times.size(), std::vector<double>(x0_grid.size(), 0.0));
    parallel_for(times.size(), [&](std::size_t i) {
        const auto dev = ev.deviation(times[i]);
        double sup = 0.0;
        double err = 0.0;
        for (std::size_t x = 0; x < dev.size(); ++x) {
            out.per_x0[i][x] = dev[x].value;
            sup = std::max(sup, std::abs(dev[x].value));
            err = std::max(err, dev[x].err);
        }
        out.series.values[i] = sup;
        out.series.errors[i] = err;
    });
    return out;
}

void write_csv(std::ostream& os, const CoulombSeries& s)
{
    std::vector<std::string> head = {"t", "sup_dev"};
    for (double x : s.x0) {
        head.push_back("dev_x0=" + format_double(x));
    }
    write_csv_row(os, head);
    for (std::size_t i = 0; i < s.series.times.size(); ++i) {
        std::vector<std::string> row = {format_double(s.series.times[i]),
                                        format_double(s.series.values[i])};
        for (double v : s.per_x0[i]) {
            row.push_back(format_double(v));
        }
        write_csv_row(os, row);
    }
}

} // namespace phasemix

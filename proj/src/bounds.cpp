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
#include "phasemix/bounds.hpp"

#include "phasemix/csv.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/profiles.hpp"
#include "phasemix/quadrature.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

namespace phasemix {

std::string to_string(BoundKind kind)
{
    switch (kind) {
    case BoundKind::prop21:
        return "prop21";
    case BoundKind::prop31:
        return "prop31";
    case BoundKind::localized:
        return "localized";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Cutoff

double Cutoff::chi(double u) const
{
    return profiles::cutoff(u);
}

double Cutoff::eta(double k) const
{
    double v = 1.0;
    for (double c : centers) {
        v *= 1.0 - profiles::cutoff((k - c) / epsilon);
    }
    return v;
}

double Cutoff::eta_d1(double k) const
{
    const std::size_t n = centers.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = -profiles::cutoff_d1((k - centers[i]) / epsilon) / epsilon;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                p *= 1.0 - profiles::cutoff((k - centers[j]) / epsilon);
            }
        }
        s += p;
    }
    return s;
}

double Cutoff::eta_d2(double k) const
{
    const std::size_t n = centers.size();
    std::vector<double> g(n), g1(n), g2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (k - centers[i]) / epsilon;
        g[i] = 1.0 - profiles::cutoff(u);
        g1[i] = -profiles::cutoff_d1(u) / epsilon;
        g2[i] = -profiles::cutoff_d2(u) / (epsilon * epsilon);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double p = (i == j) ? g2[i] : g1[i] * g1[j];
            for (std::size_t l = 0; l < n; ++l) {
                if (l != i && l != j) {
                    p *= g[l];
                }
            }
            s += p;
        }
    }
    return s;
}

std::vector<double> Cutoff::knots() const
{
    std::vector<double> out;
    for (double c : centers) {
        for (double s : {-1.0, -0.5, 0.5, 1.0}) {
            out.push_back(c + s * epsilon);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Cutoff make_cutoff(const std::vector<double>& centers, double epsilon, const DomainBox& domain)
{
    if (!(epsilon > 0) || epsilon > 1) {
        throw ConfigError("phasemix::make_cutoff: epsilon must lie in (0, 1]");
    }
    if (domain.d != 1) {
        throw ConfigError("phasemix::make_cutoff: cutoffs are one-dimensional");
    }
    for (double c : centers) {
        if (!(c > domain.lo[0] && c < domain.hi[0])) {
            throw ConfigError("phasemix::make_cutoff: center outside the domain");
        }
    }
    Cutoff cut;
    cut.centers = centers;
    cut.epsilon = epsilon;
    return cut;
}

ScalarField apply_cutoff(const ScalarField& phi, const Cutoff& cut)
{
    if (phi.dim() != 1) {
        throw ConfigError("phasemix::apply_cutoff: one-dimensional fields only");
    }
    if (phi.is_separable()) {
        SeparableParts parts = *phi.separable;
        parts.profiles[0] = multiply(
            parts.profiles[0], [cut](double k) { return cut.eta(k); }, [cut](double k) { return cut.eta_d1(k); },
            cut.knots());
        return make_separable_field(phi.domain, std::move(parts));
    }
    auto v = phi.value;
    auto g = phi.grad_k;
    std::vector<std::vector<double>> knots = phi.knots;
    const auto ck = cut.knots();
    knots[0].insert(knots[0].end(), ck.begin(), ck.end());
    return make_general_field(
        phi.domain, phi.support, [v, cut](const Vec& q, const Vec& k) { return cut.eta(k[0]) * v(q, k); },
        [v, g, cut](const Vec& q, const Vec& k) -> Vec {
            return cut.eta(k[0]) * g(q, k) + vec1(cut.eta_d1(k[0]) * v(q, k));
        },
        phi.nonnegative, knots);
}

// ---------------------------------------------------------------------------
// One-dimensional angular norms

namespace {

constexpr double linf_inflation = 1.05;
constexpr double omega_prime_floor = 1e-12;

// per-k integrals over the circle of |phi|, |d_k phi|, |f0|, |d_k f0| and of
// |d_k(phi / omega')|; separable fields use their cached angular integrals
struct AngularNorms1D {
    const Model& model;
    const ScalarField& phi;

    double phi_abs(double k) const
    {
        if (phi.is_separable()) {
            return std::abs(phi.separable->profile(vec1(k))) * phi.separable->angular_abs_integral();
        }
        return abs_integral_periodic([&](double q) { return phi.value(vec1(q), vec1(k)); });
    }

    double phi_dk_abs(double k) const
    {
        if (phi.is_separable()) {
            return std::abs(phi.separable->profile_grad(vec1(k))[0]) * phi.separable->angular_abs_integral();
        }
        return abs_integral_periodic([&](double q) { return phi.grad_k(vec1(q), vec1(k))[0]; });
    }

    double f0_abs(double k) const
    {
        const ScalarField& f0 = model.f0;
        if (f0.is_separable()) {
            return std::abs(f0.separable->profile(vec1(k))) * f0.separable->angular_abs_integral();
        }
        return abs_integral_periodic([&](double q) { return f0.value(vec1(q), vec1(k)); });
    }

    double f0_dk_abs(double k) const
    {
        const ScalarField& f0 = model.f0;
        if (f0.is_separable()) {
            return std::abs(f0.separable->profile_grad(vec1(k))[0]) * f0.separable->angular_abs_integral();
        }
        return abs_integral_periodic([&](double q) { return f0.grad_k(vec1(q), vec1(k))[0]; });
    }

    double phi_over_wp_dk_abs(double k) const
    {
        const double w1 = omega_prime(model.freq, k);
        const double w2 = omega_second(model.freq, k);
        const Vec kv = vec1(k);
        if (phi.is_separable()) {
            const auto& p = *phi.separable;
            const double d = p.profile_grad(kv)[0] / w1 - p.profile(kv) * w2 / (w1 * w1);
            return std::abs(d) * p.angular_abs_integral();
        }
        return abs_integral_periodic([&](double q) {
            const Vec qv = vec1(q);
            return phi.grad_k(qv, kv)[0] / w1 - phi.value(qv, kv) * w2 / (w1 * w1);
        });
    }

    double phi_sup(const std::vector<double>& ks) const
    {
        double s = 0.0;
        if (phi.is_separable()) {
            for (double k : ks) {
                s = std::max(s, std::abs(phi.separable->profile(vec1(k))));
            }
            return s * phi.separable->angular_sup();
        }
        for (double k : ks) {
            for (int j = 0; j < 256; ++j) {
                s = std::max(s, std::abs(phi.value(vec1(two_pi * j / 256.0), vec1(k))));
            }
        }
        return s;
    }
};

// roots of a sampled function on [lo, hi], refined by bisection
std::vector<double> sign_changes(const std::function<double(double)>& f, double lo, double hi, int samples)
{
    std::vector<double> roots;
    double xa = lo;
    double fa = f(lo);
    for (int i = 1; i <= samples; ++i) {
        const double xb = lo + (hi - lo) * double(i) / samples;
        const double fb = f(xb);
        if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) {
            double a = xa, b = xb, ga = fa;
            for (int it = 0; it < 80; ++it) {
                const double m = 0.5 * (a + b);
                const double gm = f(m);
                if ((gm < 0) == (ga < 0)) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        xa = xb;
        fa = fb;
    }
    return roots;
}

std::vector<double> uniform_points(double lo, double hi, int n)
{
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
        x[i] = lo + (hi - lo) * double(i) / double(n - 1);
    }
    return x;
}

struct Support1D {
    bool empty = true;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> knots;
};

Support1D effective_support(const Model& model, const ScalarField& phi)
{
    Support1D s;
    auto box = model.f0.support.intersect(phi.support);
    if (!box) {
        return s;
    }
    s.empty = false;
    s.lo = box->lo[0];
    s.hi = box->hi[0];
    std::vector<double> merged = model.f0.knots[0];
    merged.insert(merged.end(), phi.knots[0].begin(), phi.knots[0].end());
    s.knots = clip_knots(merged, s.lo, s.hi);
    return s;
}

std::vector<double> with_roots(std::vector<double> knots, const std::function<double(double)>& f, bool separable)
{
    if (!separable) {
        return knots;
    }
    const double lo = knots.front();
    const double hi = knots.back();
    const auto r = sign_changes(f, lo, hi, 4096);
    knots.insert(knots.end(), r.begin(), r.end());
    return clip_knots(knots, lo, hi);
}

Estimate integrate_1d(const std::vector<double>& knots, const std::function<double(double)>& f, double rel_tol)
{
    std::vector<std::vector<double>> k{knots};
    return integrate_box_adaptive(k, [&](const Vec& x) { return f(x[0]); }, rel_tol, 1e-300, 4, 12);
}

} // namespace

// ---------------------------------------------------------------------------
// Proposition-type constants

namespace {

bool vanishes_on(const ScalarField& phi, double a, double b)
{
    constexpr int nk = 17;
    constexpr int nq = 37;
    for (int i = 0; i < nk; ++i) {
        const double k = a + (b - a) * double(i) / double(nk - 1);
        for (int j = 0; j < nq; ++j) {
            if (phi.value(vec1(two_pi * double(j) / nq), vec1(k)) != 0.0) {
                return false;
            }
        }
    }
    return true;
}

// maximal unions of consecutive knot panels on which phi is not identically zero
std::vector<std::pair<double, double>> live_runs(const ScalarField& phi, const std::vector<double>& knots)
{
    std::vector<std::pair<double, double>> runs;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (vanishes_on(phi, knots[i], knots[i + 1])) {
            continue;
        }
        if (!runs.empty() && runs.back().second == knots[i]) {
            runs.back().second = knots[i + 1];
        } else {
            runs.emplace_back(knots[i], knots[i + 1]);
        }
    }
    return runs;
}

} // namespace

MixingBound bound_1d(const Model& model, const ScalarField& phi)
{
    if (model.freq.dim() != 1 || phi.dim() != 1) {
        throw PreconditionError("phasemix::bound_1d: requires d = 1");
    }
    MixingBound b;
    b.kind = BoundKind::prop21;
    const Support1D s = effective_support(model, phi);
    if (s.empty) {
        b.ingredients = {{"phi_over_omegap_dk_f0", 0.0}, {"f0_dk_phi_over_omegap", 0.0}};
        return b;
    }
    // knot panels on which phi vanishes identically drop out
    const auto runs = live_runs(phi, s.knots);
    if (runs.empty()) {
        b.ingredients = {{"phi_over_omegap_dk_f0", 0.0}, {"f0_dk_phi_over_omegap", 0.0}};
        return b;
    }
    double min_wp = std::numeric_limits<double>::infinity();
    for (const auto& [lo, hi] : runs) {
        for (const Vec& kd : model.freq.degenerate_points) {
            if (kd[0] >= lo && kd[0] <= hi) {
                throw DegeneracyError(
                    "phasemix::bound_1d: omega' vanishes on the effective support; use localized_bound");
            }
        }
        for (double k : uniform_points(lo, hi, 1025)) {
            min_wp = std::min(min_wp, std::abs(omega_prime(model.freq, k)));
        }
    }
    if (!(min_wp > omega_prime_floor)) {
        throw DegeneracyError("phasemix::bound_1d: omega' vanishes on the effective support; use localized_bound");
    }
    const AngularNorms1D n{model, phi};
    const bool sep = model.f0.is_separable() && phi.is_separable();
    const double rel = sep ? 1e-10 : 1e-7;
    const auto psi_inner = [&](double k) {
        const auto& p = *phi.separable;
        const Vec kv = vec1(k);
        const double w1 = omega_prime(model.freq, k);
        return p.profile_grad(kv)[0] / w1 - p.profile(kv) * omega_second(model.freq, k) / (w1 * w1);
    };
    Estimate t1;
    Estimate t2;
    for (const auto& [lo, hi] : runs) {
        const auto knots1 = clip_knots(s.knots, lo, hi);
        const auto knots2 = phi.is_separable() ? with_roots(knots1, psi_inner, true) : knots1;
        const Estimate a = integrate_1d(
            knots1, [&](double k) { return n.phi_abs(k) * n.f0_dk_abs(k) / std::abs(omega_prime(model.freq, k)); },
            rel);
        const Estimate c = integrate_1d(knots2, [&](double k) { return n.phi_over_wp_dk_abs(k) * n.f0_abs(k); }, rel);
        t1.value += a.value;
        t1.err += a.err;
        t2.value += c.value;
        t2.err += c.err;
    }
    b.ingredients["phi_over_omegap_dk_f0"] = t1.value;
    b.ingredients["f0_dk_phi_over_omegap"] = t2.value;
    b.ingredients["min_abs_omegap"] = min_wp;
    b.constant = t1.value + t2.value + t1.err + t2.err;
    return b;
}

MixingBound bound_multid(const Model& model, const ScalarField& phi)
{
    const int d = model.freq.dim();
    if (d < 2 || phi.dim() != d) {
        throw PreconditionError("phasemix::bound_multid: requires d >= 2");
    }
    MixingBound b;
    b.kind = BoundKind::prop31;
    auto box = model.f0.support.intersect(phi.support);
    if (!box) {
        return b;
    }
    constexpr double h = 1e-5;
    constexpr double cond_limit = 1e12;
    const bool phi_sep = phi.is_separable();

    // sup over q of |phi| and of sum_i d_i(M_ji phi) at fixed k
    const int nq = 32;
    auto sup_terms = [&](const Vec& k) {
        const Mat J = model.freq.jac(k);
        const Eigen::MatrixXd Jd = J;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jd);
        const auto sv = svd.singularValues();
        if (!(sv[d - 1] > 0) || sv[0] / sv[d - 1] > cond_limit) {
            throw DegeneracyError("phasemix::bound_multid: D omega is near-singular on the effective support");
        }
        const Mat M = J.inverse();
        std::vector<Mat> dM(d);
        for (int i = 0; i < d; ++i) {
            Vec kp = k, km = k;
            kp[i] += h;
            km[i] -= h;
            const Mat dJ = (model.freq.jac(kp) - model.freq.jac(km)) / (2 * h);
            dM[i] = -M * dJ * M;
        }
        const double m_inf = M.cwiseAbs().maxCoeff();
        auto div_at = [&](double value, const Vec& grad) {
            double best = 0.0;
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int i = 0; i < d; ++i) {
                    s += dM[i](j, i) * value + M(j, i) * grad[i];
                }
                best = std::max(best, std::abs(s));
            }
            return best;
        };
        std::pair<double, double> out{0.0, 0.0};
        if (phi_sep) {
            const auto& p = *phi.separable;
            const double a = p.angular_sup();
            out.first = m_inf * std::abs(p.profile(k)) * a;
            out.second = div_at(p.profile(k), p.profile_grad(k)) * a;
        } else {
            std::vector<int> idx(d, 0);
            Vec q(d);
            for (;;) {
                for (int i = 0; i < d; ++i) {
                    q[i] = two_pi * idx[i] / double(nq);
                }
                const double v = phi.value(q, k);
                out.first = std::max(out.first, m_inf * std::abs(v));
                out.second = std::max(out.second, div_at(v, phi.grad_k(q, k)));
                int i = d - 1;
                while (i >= 0 && ++idx[i] == nq) {
                    idx[i] = 0;
                    --i;
                }
                if (i < 0) {
                    break;
                }
            }
        }
        return out;
    };
    auto sup_on_grid = [&](int n) {
        std::pair<double, double> best{0.0, 0.0};
        std::vector<int> idx(d, 0);
        Vec k(d);
        for (;;) {
            for (int i = 0; i < d; ++i) {
                k[i] = box->lo[i] + (box->hi[i] - box->lo[i]) * idx[i] / double(n - 1);
            }
            const auto v = sup_terms(k);
            best.first = std::max(best.first, v.first);
            best.second = std::max(best.second, v.second);
            int i = d - 1;
            while (i >= 0 && ++idx[i] == n) {
                idx[i] = 0;
                --i;
            }
            if (i < 0) {
                break;
            }
        }
        return best;
    };
    const int n0 = d == 2 ? 33 : 13;
    const auto coarse = sup_on_grid(n0);
    const auto fine = sup_on_grid(2 * n0 - 1);
    const double sup_m_phi = linf_inflation * std::max(coarse.first, fine.first);
    const double sup_div = linf_inflation * std::max(coarse.second, fine.second);

    // L1 norms of f0 and its k-derivatives over T^d x K
    const ScalarField& f0 = model.f0;
    std::vector<double> l1_grad(d, 0.0);
    double l1_f0 = 0.0;
    double l1_fbar = 0.0;
    std::vector<double> l1_grad_fbar(d, 0.0);
    if (f0.is_separable()) {
        const auto& p = *f0.separable;
        const double ang = p.angular_abs_integral();
        const double ang_mean = std::abs(p.angular_integral());
        const Estimate e0 = integrate_box_adaptive(
            f0.knots, [&](const Vec& k) { return std::abs(p.profile(k)); }, 1e-10, 1e-300, 4, 8);
        l1_f0 = ang * (e0.value + e0.err);
        l1_fbar = ang_mean * e0.value;
        for (int i = 0; i < d; ++i) {
            const Estimate ei = integrate_box_adaptive(
                f0.knots, [&](const Vec& k) { return std::abs(p.profile_grad(k)[i]); }, 1e-10, 1e-300, 4, 8);
            l1_grad[i] = ang * (ei.value + ei.err);
            l1_grad_fbar[i] = ang_mean * ei.value;
        }
    } else {
        std::vector<std::vector<double>> knots(d, std::vector<double>{0.0, two_pi});
        knots.insert(knots.end(), f0.knots.begin(), f0.knots.end());
        auto split = [d](const Vec& x) { return std::pair<Vec, Vec>(x.head(d), x.tail(d)); };
        const Estimate e0 = integrate_box_adaptive(
            knots,
            [&](const Vec& x) {
                auto [q, k] = split(x);
                return std::abs(f0.value(q, k));
            },
            1e-6, 1e-300, 2, 5, 8);
        l1_f0 = e0.value + e0.err;
        for (int i = 0; i < d; ++i) {
            const Estimate ei = integrate_box_adaptive(
                knots,
                [&](const Vec& x) {
                    auto [q, k] = split(x);
                    return std::abs(f0.grad_k(q, k)[i]);
                },
                1e-6, 1e-300, 2, 5, 8);
            l1_grad[i] = ei.value + ei.err;
        }
    }
    double sum_grad = 0.0;
    for (int i = 0; i < d; ++i) {
        sum_grad += l1_grad[i];
        b.ingredients["l1_dk" + std::to_string(i + 1) + "_f0"] = l1_grad[i];
        if (f0.is_separable()) {
            b.ingredients["l1_dk" + std::to_string(i + 1) + "_fbar"] = l1_grad_fbar[i];
        }
    }
    b.ingredients["l1_f0"] = l1_f0;
    if (f0.is_separable()) {
        b.ingredients["l1_fbar"] = l1_fbar;
    }
    b.ingredients["linf_Minf_phi"] = sup_m_phi;
    b.ingredients["linf_div_M_phi"] = sup_div;
    b.constant = two_pi * d * (sup_m_phi * sum_grad + sup_div * l1_f0);
    return b;
}

// ---------------------------------------------------------------------------
// Localized bound

MixingBound localized_bound(const Model& model, const ScalarField& phi, double t, const LocalizedOptions& opts)
{
    if (model.freq.dim() != 1 || phi.dim() != 1) {
        throw PreconditionError("phasemix::localized_bound: requires d = 1");
    }
    if (model.freq.degenerate_points.empty()) {
        throw PreconditionError("phasemix::localized_bound: the frequency map declares no degenerate points");
    }
    if (!(t > 0)) {
        throw ConfigError("phasemix::localized_bound: t must be positive");
    }
    if (opts.grid_points < 2) {
        throw ConfigError("phasemix::localized_bound: need at least two grid points");
    }
    MixingBound b;
    b.kind = BoundKind::localized;
    b.t = t;
    const Support1D s = effective_support(model, phi);
    if (s.empty) {
        b.epsilon_star = 1.0;
        return b;
    }
    std::vector<double> centers;
    for (const Vec& kd : model.freq.degenerate_points) {
        centers.push_back(kd[0]);
    }
    const AngularNorms1D n{model, phi};
    const bool sep = model.f0.is_separable() && phi.is_separable();
    const double rel = sep ? 1e-10 : 1e-7;
    const Estimate i_phi_a0 = integrate_1d(s.knots, [&](double k) { return n.phi_abs(k) * n.f0_dk_abs(k); }, rel);
    const Estimate i_dphi_b0 = integrate_1d(s.knots, [&](double k) { return n.phi_dk_abs(k) * n.f0_abs(k); }, rel);
    const Estimate i_phi_b0 = integrate_1d(s.knots, [&](double k) { return n.phi_abs(k) * n.f0_abs(k); }, rel);

    const double sup_phi = linf_inflation * std::max(n.phi_sup(uniform_points(s.lo, s.hi, 513)),
                                                     n.phi_sup(uniform_points(s.lo, s.hi, 1025)));
    const double L = s.hi - s.lo;

    struct Eval {
        double total = std::numeric_limits<double>::infinity();
        double a = 0.0;
        double r = 0.0;
        double sup1 = 0.0;
        double sup2 = 0.0;
    };
    auto evaluate = [&](double eps) {
        Eval e;
        const Cutoff cut = make_cutoff(centers, eps, model.freq.domain);
        auto sups = [&](int npts) {
            double s1 = 0.0, s2 = 0.0;
            for (double k : uniform_points(s.lo, s.hi, npts)) {
                const double et = cut.eta(k);
                const double ed = cut.eta_d1(k);
                if (et == 0.0 && ed == 0.0) {
                    continue;
                }
                const double w1 = omega_prime(model.freq, k);
                if (std::abs(w1) <= omega_prime_floor) {
                    return std::pair<double, double>(std::numeric_limits<double>::infinity(),
                                                     std::numeric_limits<double>::infinity());
                }
                s1 = std::max(s1, std::abs(et / w1));
                s2 = std::max(s2, std::abs(ed / w1 - et * omega_second(model.freq, k) / (w1 * w1)));
            }
            return std::pair<double, double>(s1, s2);
        };
        const int np = std::max(256, static_cast<int>(std::ceil(64.0 * L / eps)));
        const auto c = sups(np);
        const auto f = sups(2 * np - 1);
        e.sup1 = linf_inflation * std::max(c.first, f.first);
        e.sup2 = linf_inflation * std::max(c.second, f.second);
        if (!std::isfinite(e.sup1) || !std::isfinite(e.sup2)) {
            return e;
        }
        e.a = e.sup1 * (i_phi_a0.value + i_phi_a0.err + i_dphi_b0.value + i_dphi_b0.err) +
              e.sup2 * (i_phi_b0.value + i_phi_b0.err);
        std::vector<double> knots = s.knots;
        const auto ck = cut.knots();
        knots.insert(knots.end(), ck.begin(), ck.end());
        knots = clip_knots(knots, s.lo, s.hi);
        const Estimate rem = integrate_1d(knots, [&](double k) { return (1.0 - cut.eta(k)) * n.f0_abs(k); }, rel);
        e.r = 2.0 * sup_phi * (rem.value + rem.err);
        e.total = e.a / t + e.r;
        return e;
    };

    const double eps_lo = std::min(1.0, 1.0 / std::sqrt(t));
    const int ng = eps_lo < 1.0 ? opts.grid_points : 1;
    std::vector<double> grid(ng);
    for (int i = 0; i < ng; ++i) {
        grid[i] = ng == 1 ? 1.0 : std::exp(std::log(eps_lo) * (1.0 - double(i) / double(ng - 1)));
    }
    std::vector<Eval> evals(ng);
    parallel_for(static_cast<std::size_t>(ng), [&](std::size_t i) { evals[i] = evaluate(grid[i]); });
    std::size_t best = 0;
    for (std::size_t i = 1; i < evals.size(); ++i) {
        if (evals[i].total < evals[best].total) {
            best = i;
        }
    }
    if (!std::isfinite(evals[best].total)) {
        throw NumericalFailure("phasemix::localized_bound: A(epsilon) is infinite at every grid epsilon");
    }
    double eps_star = grid[best];
    Eval e_star = evals[best];
    if (opts.refine && ng > 2) {
        // golden section on log(eps) between the neighbours of the best grid point
        double a = std::log(grid[best == 0 ? 0 : best - 1]);
        double c = std::log(grid[std::min<std::size_t>(best + 1, ng - 1)]);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = c - g * (c - a);
        double x2 = a + g * (c - a);
        Eval f1 = evaluate(std::exp(x1));
        Eval f2 = evaluate(std::exp(x2));
        for (int it = 0; it < 40 && c - a > 1e-6; ++it) {
            if (f1.total < f2.total) {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - g * (c - a);
                f1 = evaluate(std::exp(x1));
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (c - a);
                f2 = evaluate(std::exp(x2));
            }
        }
        for (const auto& [x, f] : {std::pair<double, Eval>{x1, f1}, std::pair<double, Eval>{x2, f2}}) {
            if (f.total < e_star.total) {
                e_star = f;
                eps_star = std::exp(x);
            }
        }
    }
    b.constant = e_star.total;
    b.epsilon_star = eps_star;
    b.ingredients["A"] = e_star.a;
    b.ingredients["R"] = e_star.r;
    b.ingredients["linf_eta_over_omegap"] = e_star.sup1;
    b.ingredients["linf_dk_eta_over_omegap"] = e_star.sup2;
    b.ingredients["int_Phi_A0"] = i_phi_a0.value;
    b.ingredients["int_dPhi_B0"] = i_dphi_b0.value;
    b.ingredients["int_Phi_B0"] = i_phi_b0.value;
    b.ingredients["linf_phi"] = sup_phi;
    return b;
}

void write_csv(std::ostream& os, const std::vector<MixingBound>& bounds)
{
    std::set<std::string> names;
    for (const auto& b : bounds) {
        for (const auto& [k, v] : b.ingredients) {
            names.insert(k);
        }
    }
    std::vector<std::string> header{"kind", "t", "constant", "epsilon_star"};
    for (const auto& n : names) {
        header.push_back("ingredient:" + n);
    }
    write_csv_row(os, header);
    for (const auto& b : bounds) {
        std::vector<std::string> row{to_string(b.kind), b.t ? format_double(*b.t) : "", format_double(b.constant),
                                     b.epsilon_star ? format_double(*b.epsilon_star) : ""};
        for (const auto& n : names) {
            auto it = b.ingredients.find(n);
            row.push_back(it == b.ingredients.end() ? "" : format_double(it->second));
        }
        write_csv_row(os, row);
    }
}

} // namespace phasemix

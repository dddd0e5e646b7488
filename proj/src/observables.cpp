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
#include "phasemix/observables.hpp"

#include "phasemix/csv.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/transport.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace phasemix {

// ---------------------------------------------------------------------------
// Fourier slices

std::size_t FourierSlice::index(const std::vector<int>& m) const
{
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int i = 0; i < d; ++i) {
        idx += static_cast<std::size_t>(m[i] + m_max) * stride;
        stride *= static_cast<std::size_t>(side());
    }
    return idx;
}

std::vector<int> FourierSlice::mode(std::size_t index) const
{
    std::vector<int> m(d);
    for (int i = 0; i < d; ++i) {
        m[i] = static_cast<int>(index % side()) - m_max;
        index /= side();
    }
    return m;
}

namespace {

void check_grid(int m_max, int grid_size)
{
    if (m_max < 0 || grid_size < 1) {
        throw ConfigError("phasemix::fourier_coefficients: m_max and grid_size must be positive");
    }
    if (grid_size < 4 * m_max) {
        throw ConfigError("phasemix::fourier_coefficients: grid_size must be at least 4 * m_max");
    }
}

std::size_t ipow(std::size_t b, int e)
{
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) {
        r *= b;
    }
    return r;
}

// 1-D coefficients (1/N) sum_j a(q_j) exp(-i m q_j) for |m| <= m_max
std::vector<Complex> angular_coefficients(const Angular1D& a, int m_max, int n)
{
    Eigen::FFT<double> fft;
    std::vector<double> samples(n);
    for (int j = 0; j < n; ++j) {
        samples[j] = a.value(two_pi * double(j) / n);
    }
    std::vector<Complex> spec;
    fft.fwd(spec, samples);
    std::vector<Complex> out(2 * m_max + 1);
    for (int m = -m_max; m <= m_max; ++m) {
        out[m + m_max] = spec[(m + n) % n] / double(n);
    }
    return out;
}

FourierSlice separable_slice(const SeparableParts& parts, const std::vector<std::vector<Complex>>& ang,
                             const Vec& k, int m_max)
{
    FourierSlice s;
    s.d = static_cast<int>(parts.profiles.size());
    s.m_max = m_max;
    const double p = parts.profile(k);
    s.coeffs.assign(ipow(s.side(), s.d), Complex(0.0));
    for (std::size_t i = 0; i < s.coeffs.size(); ++i) {
        const auto m = s.mode(i);
        Complex c = p;
        for (int l = 0; l < s.d; ++l) {
            c *= ang[l][m[l] + m_max];
        }
        s.coeffs[i] = c;
    }
    return s;
}

FourierSlice general_slice(const ScalarField& field, const Vec& k, int m_max, int n)
{
    const int d = field.dim();
    const std::size_t total = ipow(n, d);
    std::vector<Complex> data(total);
    Vec q(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (int i = 0; i < d; ++i) {
            q[i] = two_pi * double(r % n) / n;
            r /= n;
        }
        data[idx] = field.value(q, k);
    }
    Eigen::FFT<double> fft;
    std::vector<Complex> line(n);
    std::vector<Complex> out_line;
    std::size_t stride = 1;
    for (int axis = 0; axis < d; ++axis) {
        for (std::size_t base = 0; base < total; ++base) {
            if ((base / stride) % n != 0) {
                continue;
            }
            for (int j = 0; j < n; ++j) {
                line[j] = data[base + j * stride];
            }
            fft.fwd(out_line, line);
            for (int j = 0; j < n; ++j) {
                data[base + j * stride] = out_line[j];
            }
        }
        stride *= n;
    }
    FourierSlice s;
    s.d = d;
    s.m_max = m_max;
    s.coeffs.resize(ipow(s.side(), d));
    const double scale = 1.0 / double(total);
    for (std::size_t i = 0; i < s.coeffs.size(); ++i) {
        const auto m = s.mode(i);
        std::size_t src = 0;
        std::size_t st = 1;
        for (int l = 0; l < d; ++l) {
            src += static_cast<std::size_t>((m[l] + n) % n) * st;
            st *= n;
        }
        s.coeffs[i] = data[src] * scale;
    }
    return s;
}

std::vector<std::vector<Complex>> separable_angular_table(const SeparableParts& parts, int m_max, int n)
{
    std::vector<std::vector<Complex>> ang;
    for (const auto& a : parts.angulars) {
        ang.push_back(angular_coefficients(a, m_max, n));
    }
    return ang;
}

} // namespace

FourierSlice fourier_coefficients(const ScalarField& field, const Vec& k, int m_max, int grid_size)
{
    check_grid(m_max, grid_size);
    if (field.is_separable()) {
        return separable_slice(*field.separable, separable_angular_table(*field.separable, m_max, grid_size), k,
                               m_max);
    }
    return general_slice(field, k, m_max, grid_size);
}

FourierTable::FourierTable(ScalarField field, int m_max, int grid_size)
    : field_(std::move(field)), m_max_(m_max), grid_size_(grid_size)
{
    check_grid(m_max, grid_size);
}

FourierSlice FourierTable::at(const Vec& k) const
{
    return fourier_coefficients(field_, k, m_max_, grid_size_);
}

// ---------------------------------------------------------------------------
// Shared geometry

namespace {

struct Overlap {
    bool empty = true;
    DomainBox box;
    std::vector<std::vector<double>> knots;
};

Overlap overlap_of(const ScalarField& a, const ScalarField& b)
{
    if (a.dim() != b.dim()) {
        throw ConfigError("phasemix::observables: f0 and phi have different dimensions");
    }
    Overlap o;
    auto box = a.support.intersect(b.support);
    if (!box) {
        return o;
    }
    o.empty = false;
    o.box = *box;
    for (int i = 0; i < a.dim(); ++i) {
        std::vector<double> merged = a.knots[i];
        merged.insert(merged.end(), b.knots[i].begin(), b.knots[i].end());
        o.knots.push_back(clip_knots(merged, o.box.lo[i], o.box.hi[i]));
    }
    return o;
}

// points per dimension on a uniform grid over a box, endpoints included
std::vector<Vec> probe_grid(const DomainBox& box, int n)
{
    const int d = box.d;
    std::vector<Vec> pts;
    std::vector<int> idx(d, 0);
    for (;;) {
        Vec k(d);
        for (int i = 0; i < d; ++i) {
            k[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * double(idx[i]) / double(n - 1);
        }
        pts.push_back(k);
        int i = d - 1;
        while (i >= 0 && ++idx[i] == n) {
            idx[i] = 0;
            --i;
        }
        if (i < 0) {
            break;
        }
    }
    return pts;
}

std::vector<Rule1D> angle_rules(int d, int nodes)
{
    constexpr int order = 8;
    const int panels = std::max(1, nodes / order);
    const std::vector<double> knots{0.0, two_pi};
    return std::vector<Rule1D>(d, rule_from_breaks(distribute_panels(knots, panels), order));
}

double angle_integral(const std::vector<Rule1D>& rules, const std::function<double(const Vec&)>& f)
{
    return integrate_tensor<double>(rules, f).sum();
}

void check_model_phi(const Model& model, const ScalarField& phi, const char* op)
{
    if (phi.dim() != model.freq.dim() || model.f0.dim() != model.freq.dim()) {
        throw ConfigError(std::string("phasemix::") + op + ": dimension mismatch between model and phi");
    }
}

// ---------------------------------------------------------------------------
// Spectral machinery

struct SpectralPlan {
    int d = 1;
    Overlap overlap;
    int m_max = 0;
    double tail = 0.0;
    // bound on the effect of DFT aliasing on the kept modes, and on the mean alone
    double alias = 0.0;
    double alias_mean = 0.0;
    bool separable = false;
    // separable: (2pi)^d f0_ang^(m) conj(phi_ang^(m)), slice-indexed
    std::vector<Complex> c;
    std::shared_ptr<const SeparableParts> f_parts;
    std::shared_ptr<const SeparableParts> phi_parts;
    std::vector<Mat> probe_jac;
    const ScalarField* f0 = nullptr;
    const ScalarField* phi = nullptr;
    int grid_size = 256;
};

constexpr int probe_points_1d = 32;

SpectralPlan make_plan(const Model& model, const ScalarField& phi, const ExpectationOptions& opts)
{
    check_model_phi(model, phi, "expectation_spectral");
    if (!(opts.tol > 0)) {
        throw ConfigError("phasemix::expectation_spectral: tol must be positive");
    }
    SpectralPlan plan;
    plan.d = model.freq.dim();
    plan.overlap = overlap_of(model.f0, phi);
    plan.f0 = &model.f0;
    plan.phi = &phi;
    plan.grid_size = opts.grid_size;
    if (plan.overlap.empty) {
        return plan;
    }
    const int d = plan.d;
    const int cap = std::max(1, opts.grid_size / 4);
    const double vol = plan.overlap.box.volume();
    const double scale_d = std::pow(two_pi, d);
    std::vector<double> shell_max(cap + 1, 0.0);
    std::vector<double> shell_alias(cap + 1, 0.0);
    const auto shell_of = [](const std::vector<int>& m) {
        int norm = 0;
        for (int v : m) {
            norm = std::max(norm, std::abs(v));
        }
        return norm;
    };

    plan.separable = model.f0.is_separable() && phi.is_separable();
    const int probes = plan.separable ? probe_points_1d : (d == 1 ? probe_points_1d : 8);
    const auto pts = probe_grid(plan.overlap.box, probes);
    for (const Vec& k : pts) {
        plan.probe_jac.push_back(model.freq.jac(k));
    }

    FourierSlice full;
    if (plan.separable) {
        plan.f_parts = model.f0.separable;
        plan.phi_parts = phi.separable;
        double pmax = 0.0;
        for (const Vec& k : pts) {
            pmax = std::max(pmax, std::abs(plan.f_parts->profile(k) * plan.phi_parts->profile(k)));
        }
        full.d = d;
        full.m_max = cap;
        full.coeffs.resize(ipow(full.side(), d));
        // coefficients from a doubled grid; their change from the coarser grid bounds the
        // aliasing. 1-D transforms are cheap, so the grid grows until that bound is small.
        constexpr int max_angular_grid = 1 << 16;
        int n = opts.grid_size;
        auto fa1 = separable_angular_table(*plan.f_parts, cap, n);
        auto pa1 = separable_angular_table(*plan.phi_parts, cap, n);
        for (;;) {
            const auto fa = separable_angular_table(*plan.f_parts, cap, 2 * n);
            const auto pa = separable_angular_table(*plan.phi_parts, cap, 2 * n);
            std::fill(shell_max.begin(), shell_max.end(), 0.0);
            std::fill(shell_alias.begin(), shell_alias.end(), 0.0);
            for (std::size_t i = 0; i < full.coeffs.size(); ++i) {
                const auto m = full.mode(i);
                Complex c = scale_d;
                Complex c1 = scale_d;
                for (int l = 0; l < d; ++l) {
                    c *= fa[l][m[l] + cap] * std::conj(pa[l][m[l] + cap]);
                    c1 *= fa1[l][m[l] + cap] * std::conj(pa1[l][m[l] + cap]);
                }
                full.coeffs[i] = c;
                const int norm = shell_of(m);
                shell_max[norm] += std::abs(c) * pmax * vol * 1.05;
                shell_alias[norm] += std::abs(c - c1) * pmax * vol * 1.05;
            }
            double alias = 0.0;
            for (double v : shell_alias) {
                alias += v;
            }
            if (alias <= 0.1 * opts.tol || 4 * n > max_angular_grid) {
                break;
            }
            n *= 2;
            fa1 = fa;
            pa1 = pa;
        }
    } else {
        std::vector<double> mode_max(ipow(2 * cap + 1, d), 0.0);
        std::vector<double> mode_alias(mode_max.size(), 0.0);
        FourierSlice proto;
        proto.d = d;
        proto.m_max = cap;
        for (const Vec& k : pts) {
            const auto fs = fourier_coefficients(model.f0, k, cap, opts.grid_size);
            const auto ps = fourier_coefficients(phi, k, cap, opts.grid_size);
            const auto fs2 = fourier_coefficients(model.f0, k, cap, 2 * opts.grid_size);
            const auto ps2 = fourier_coefficients(phi, k, cap, 2 * opts.grid_size);
            for (std::size_t i = 0; i < fs.coeffs.size(); ++i) {
                const Complex a = fs.coeffs[i] * std::conj(ps.coeffs[i]);
                mode_max[i] = std::max(mode_max[i], std::abs(a));
                mode_alias[i] = std::max(mode_alias[i], std::abs(a - fs2.coeffs[i] * std::conj(ps2.coeffs[i])));
            }
        }
        for (std::size_t i = 0; i < mode_max.size(); ++i) {
            const int norm = shell_of(proto.mode(i));
            shell_max[norm] += scale_d * vol * mode_max[i] * 1.05;
            shell_alias[norm] += scale_d * vol * mode_alias[i] * 1.05;
        }
    }
    // smallest M whose neglected shells stay below tol / 10
    double tail = 0.0;
    for (int s = 1; s <= cap; ++s) {
        tail += shell_max[s];
    }
    int M = 0;
    while (M < cap && tail >= 0.1 * opts.tol) {
        ++M;
        tail -= shell_max[M];
    }
    plan.m_max = M;
    plan.tail = std::max(0.0, tail);
    plan.alias_mean = shell_alias[0];
    for (int sh = 0; sh <= M; ++sh) {
        plan.alias += shell_alias[sh];
    }
    if (plan.separable) {
        FourierSlice kept;
        kept.d = d;
        kept.m_max = M;
        kept.coeffs.resize(ipow(kept.side(), d));
        for (std::size_t i = 0; i < kept.coeffs.size(); ++i) {
            kept.coeffs[i] = full(kept.mode(i));
        }
        plan.c = std::move(kept.coeffs);
    }
    return plan;
}

// max over the probe grid of |d(m.omega)/dk_i| for each i
Vec phase_gradient_bound(const SpectralPlan& plan, const std::vector<int>& m)
{
    const int d = plan.d;
    Vec mv(d);
    for (int i = 0; i < d; ++i) {
        mv[i] = m[i];
    }
    Vec g = Vec::Zero(d);
    for (const Mat& J : plan.probe_jac) {
        g = g.cwiseMax((J * mv).cwiseAbs());
    }
    return g;
}

std::vector<int> panel_counts(const SpectralPlan& plan, const Vec& grad, double t, double c_osc)
{
    std::vector<int> p(plan.d);
    for (int i = 0; i < plan.d; ++i) {
        const double L = plan.overlap.box.hi[i] - plan.overlap.box.lo[i];
        p[i] = static_cast<int>(std::ceil(c_osc * (1.0 + std::abs(t) * grad[i] * L / two_pi)));
    }
    return p;
}

std::vector<Rule1D> k_rules(const Overlap& o, const std::vector<int>& panels, int order)
{
    std::vector<Rule1D> rules;
    for (std::size_t i = 0; i < panels.size(); ++i) {
        rules.push_back(rule_from_breaks(distribute_panels(o.knots[i], panels[i]), order));
    }
    return rules;
}

std::vector<int> doubled(std::vector<int> p)
{
    for (int& v : p) {
        v *= 2;
    }
    return p;
}

struct ComplexEstimate {
    Complex value;
    double err = 0.0;
};

ComplexEstimate separable_mode_integral(const Model& model, const SpectralPlan& plan, const std::vector<int>& m,
                                        Complex c, double t, const ExpectationOptions& opts)
{
    const int d = plan.d;
    Vec mv(d);
    for (int i = 0; i < d; ++i) {
        mv[i] = m[i];
    }
    auto run = [&](const std::vector<int>& panels) {
        const auto rules = k_rules(plan.overlap, panels, opts.order);
        return integrate_tensor<Complex>(rules, [&](const Vec& k) {
            const double p = plan.f_parts->profile(k) * plan.phi_parts->profile(k);
            if (p == 0.0) {
                return Complex(0.0);
            }
            const double phase = wrap_angle(mv.dot(model.freq.omega(k)) * t);
            return Complex(p * std::cos(phase), -p * std::sin(phase));
        });
    };
    const auto panels = panel_counts(plan, phase_gradient_bound(plan, m), t, opts.c_osc);
    const auto coarse = run(panels);
    const auto fine = run(doubled(panels));
    const Complex vf = fine.sum();
    const Complex vc = coarse.sum();
    ComplexEstimate e;
    e.value = c * vf;
    e.err = std::abs(c) * (std::abs(vf - vc) + fine.rounding_error());
    return e;
}

ComplexEstimate general_sum(const Model& model, const SpectralPlan& plan, double t, const ExpectationOptions& opts,
                            bool mean_only)
{
    const int d = plan.d;
    const int M = mean_only ? 0 : plan.m_max;
    FourierSlice proto;
    proto.d = d;
    proto.m_max = M;
    const std::size_t count = ipow(proto.side(), d);
    Vec grad = Vec::Zero(d);
    for (std::size_t i = 0; i < count; ++i) {
        grad = grad.cwiseMax(phase_gradient_bound(plan, proto.mode(i)));
    }
    const FourierTable ft(*plan.f0, M, plan.grid_size);
    const FourierTable pt(*plan.phi, M, plan.grid_size);
    std::vector<Vec> mvs;
    for (std::size_t i = 0; i < count; ++i) {
        const auto m = proto.mode(i);
        Vec mv(d);
        for (int l = 0; l < d; ++l) {
            mv[l] = m[l];
        }
        mvs.push_back(mv);
    }
    auto run = [&](const std::vector<int>& panels) {
        const auto rules = k_rules(plan.overlap, panels, opts.order);
        return integrate_tensor<Complex>(rules, [&](const Vec& k) {
            const auto fs = ft.at(k);
            const auto ps = pt.at(k);
            const Vec w = model.freq.omega(k);
            Complex s = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                const Complex a = fs.coeffs[i] * std::conj(ps.coeffs[i]);
                const double phase = wrap_angle(mvs[i].dot(w) * t);
                s += a * Complex(std::cos(phase), -std::sin(phase));
            }
            return s;
        });
    };
    const auto panels = panel_counts(plan, grad, t, opts.c_osc);
    const auto coarse = run(panels);
    const auto fine = run(doubled(panels));
    const double scale_d = std::pow(two_pi, d);
    ComplexEstimate e;
    e.value = scale_d * fine.sum();
    e.err = scale_d * (std::abs(fine.sum() - coarse.sum()) + fine.rounding_error());
    return e;
}

// int f_i phi_i exp(-i m omega_i t) dk_i along one axis of a decoupled map
ComplexEstimate axis_integral(const Model& model, const SpectralPlan& plan, int axis, int m, double t,
                              const ExpectationOptions& opts)
{
    const auto& fp = plan.f_parts->profiles[axis];
    const auto& pp = plan.phi_parts->profiles[axis];
    double grad = 0.0;
    for (const Mat& J : plan.probe_jac) {
        grad = std::max(grad, std::abs(m * J(axis, axis)));
    }
    const double L = plan.overlap.box.hi[axis] - plan.overlap.box.lo[axis];
    const int panels = static_cast<int>(std::ceil(opts.c_osc * (1.0 + std::abs(t) * grad * L / two_pi)));
    Vec k = 0.5 * (plan.overlap.box.lo + plan.overlap.box.hi);
    auto run = [&](int n) {
        const Rule1D r = rule_from_breaks(distribute_panels(plan.overlap.knots[axis], n), opts.order);
        Accumulator<Complex> acc;
        for (std::size_t j = 0; j < r.size(); ++j) {
            const double p = fp.value(r.x[j]) * pp.value(r.x[j]);
            if (p == 0.0) {
                continue;
            }
            k[axis] = r.x[j];
            const double phase = wrap_angle(m * model.freq.omega(k)[axis] * t);
            acc.add(r.w[j] * Complex(p * std::cos(phase), -p * std::sin(phase)));
        }
        return acc;
    };
    const auto coarse = run(panels);
    const auto fine = run(2 * panels);
    return {fine.sum(), std::abs(fine.sum() - coarse.sum()) + fine.rounding_error()};
}

// separable data on a decoupled map: each mode integral is a product of 1-D integrals
ComplexEstimate factored_sum(const Model& model, const SpectralPlan& plan, double t, const ExpectationOptions& opts,
                             bool mean_only)
{
    const int d = plan.d;
    const int M = plan.m_max;
    std::vector<std::vector<ComplexEstimate>> axis(d);
    for (int i = 0; i < d; ++i) {
        for (int m = -M; m <= M; ++m) {
            axis[i].push_back(mean_only && m != 0 ? ComplexEstimate{} : axis_integral(model, plan, i, m, t, opts));
        }
    }
    const double amp = plan.f_parts->amplitude * plan.phi_parts->amplitude;
    FourierSlice proto;
    proto.d = d;
    proto.m_max = M;
    Accumulator<Complex> acc;
    double err = 0.0;
    for (std::size_t i = 0; i < plan.c.size(); ++i) {
        const auto m = proto.mode(i);
        if (mean_only && std::any_of(m.begin(), m.end(), [](int v) { return v != 0; })) {
            continue;
        }
        if (plan.c[i] == Complex(0.0)) {
            continue;
        }
        Complex v = plan.c[i] * amp;
        double hi = std::abs(v);
        double lo = std::abs(v);
        for (int l = 0; l < d; ++l) {
            const auto& e = axis[l][m[l] + M];
            v *= e.value;
            hi *= std::abs(e.value) + e.err;
            lo *= std::abs(e.value);
        }
        acc.add(v);
        err += hi - lo;
    }
    return {acc.sum(), err + acc.rounding_error()};
}

ComplexEstimate spectral_sum(const Model& model, const SpectralPlan& plan, double t, const ExpectationOptions& opts,
                             bool mean_only)
{
    ComplexEstimate total{Complex(0.0), 0.0};
    if (plan.overlap.empty) {
        return total;
    }
    if (!plan.separable) {
        return general_sum(model, plan, t, opts, mean_only);
    }
    if (plan.d > 1 && model.freq.decoupled) {
        return factored_sum(model, plan, t, opts, mean_only);
    }
    FourierSlice proto;
    proto.d = plan.d;
    proto.m_max = plan.m_max;
    Accumulator<Complex> acc;
    double err = 0.0;
    for (std::size_t i = 0; i < plan.c.size(); ++i) {
        const auto m = proto.mode(i);
        const bool is_mean = std::all_of(m.begin(), m.end(), [](int v) { return v == 0; });
        if (mean_only && !is_mean) {
            continue;
        }
        if (plan.c[i] == Complex(0.0)) {
            continue;
        }
        const auto e = separable_mode_integral(model, plan, m, plan.c[i], is_mean ? 0.0 : t, opts);
        acc.add(e.value);
        err += e.err;
    }
    total.value = acc.sum();
    total.err = err + acc.rounding_error();
    return total;
}

} // namespace

ModeSelection select_modes(const Model& model, const ScalarField& phi, const ExpectationOptions& opts)
{
    const auto plan = make_plan(model, phi, opts);
    return {plan.m_max, plan.tail};
}

Estimate expectation_spectral(const Model& model, const ScalarField& phi, double t, const ExpectationOptions& opts)
{
    const auto plan = make_plan(model, phi, opts);
    const auto e = spectral_sum(model, plan, t, opts, false);
    if (std::abs(e.value.imag()) >= opts.tol) {
        throw NumericalFailure("phasemix::expectation_spectral: imaginary part " + format_double(e.value.imag()) +
                                   " exceeds tol; the Fourier coefficients are inconsistent",
                               std::abs(e.value.imag()));
    }
    return {e.value.real(), e.err + plan.tail + plan.alias};
}

Estimate spectral_mean_term(const Model& model, const ScalarField& phi, const ExpectationOptions& opts)
{
    const auto plan = make_plan(model, phi, opts);
    const auto e = spectral_sum(model, plan, 0.0, opts, true);
    return {e.value.real(), e.err + plan.alias_mean};
}

// ---------------------------------------------------------------------------
// Mixing limit

Estimate mixing_limit(const Model& model, const ScalarField& phi, [[maybe_unused]] const ExpectationOptions& opts)
{
    check_model_phi(model, phi, "mixing_limit");
    const Overlap o = overlap_of(model.f0, phi);
    if (o.empty) {
        return {0.0, 0.0};
    }
    const int d = model.freq.dim();
    const double norm = std::pow(two_pi, -d);
    try {
        if (model.f0.is_separable() && phi.is_separable()) {
            const auto& fp = *model.f0.separable;
            const auto& pp = *phi.separable;
            const double ang = norm * fp.angular_integral() * pp.angular_integral();
            if (ang == 0.0) {
                return {0.0, 0.0};
            }
            const auto e = integrate_box_adaptive(
                o.knots, [&](const Vec& k) { return fp.profile(k) * pp.profile(k); }, 1e-10, 0.0, 4, 10);
            const double v = ang * e.value;
            return {v, std::max(std::abs(ang) * e.err, 1e-10 * std::abs(v))};
        }
        const auto qr = angle_rules(d, 64);
        const auto e = integrate_box_adaptive(
            o.knots,
            [&](const Vec& k) {
                const double fbar =
                    norm * angle_integral(qr, [&](const Vec& q) { return model.f0.value(q, k); });
                if (fbar == 0.0) {
                    return 0.0;
                }
                return fbar * angle_integral(qr, [&](const Vec& q) { return phi.value(q, k); });
            },
            1e-10, 1e-300, 4, 8);
        // never claim better than the requested relative accuracy
        return {e.value, std::max(e.err, 1e-10 * std::abs(e.value))};
    } catch (const NumericalFailure& err) {
        throw NumericalFailure("phasemix::mixing_limit: quadrature did not reach 1e-10 relative", err.estimate());
    }
}

// ---------------------------------------------------------------------------
// Direct method

Estimate expectation_direct(const Model& model, const ScalarField& phi, double t, const ExpectationOptions& opts)
{
    check_model_phi(model, phi, "expectation_direct");
    if (std::abs(t) > opts.t_direct_max) {
        throw PreconditionError("phasemix::expectation_direct: |t| = " + format_double(t) + " exceeds t_direct_max = " +
                                format_double(opts.t_direct_max) + "; use expectation_spectral instead");
    }
    const Overlap o = overlap_of(model.f0, phi);
    if (o.empty) {
        return {0.0, 0.0};
    }
    const int d = model.freq.dim();
    const auto probes = probe_grid(o.box, probe_points_1d);
    Vec rate = Vec::Zero(d);
    for (const Vec& k : probes) {
        rate = rate.cwiseMax(model.freq.jac(k).cwiseAbs().rowwise().sum());
    }
    std::vector<int> panels(d);
    for (int i = 0; i < d; ++i) {
        const double L = o.box.hi[i] - o.box.lo[i];
        panels[i] = static_cast<int>(std::ceil(1.0 + std::abs(t) * rate[i] * L / two_pi));
    }
    auto integrand = [&](const Vec& x) {
        const Vec q = x.head(d);
        const Vec k = x.tail(d);
        const double p = phi.value(q, k);
        if (p == 0.0) {
            return 0.0;
        }
        return model.f0.value(advance_angles(model.freq, q, k, -t), k) * p;
    };
    const bool separable = model.f0.is_separable() && phi.is_separable();
    auto run = [&](const std::vector<int>& kp, int q_nodes) {
        std::vector<Rule1D> rules = angle_rules(d, q_nodes);
        const auto kr = k_rules(o, kp, opts.order);
        if (separable) {
            // the q-sum of a product factors into one sum per angle
            const Rule1D qr = rules.front();
            const auto& fp = *model.f0.separable;
            const auto& pp = *phi.separable;
            return integrate_tensor_parallel(kr, [&](const Vec& k) {
                double v = fp.profile(k) * pp.profile(k);
                if (v == 0.0) {
                    return 0.0;
                }
                const Vec w = model.freq.omega(k);
                for (int i = 0; i < d; ++i) {
                    const double shift = wrap_angle(w[i] * t);
                    const auto& fa = fp.angulars[i];
                    const auto& pa = pp.angulars[i];
                    Rule1D split;
                    if (!fa.knots.empty() || !pa.knots.empty()) {
                        // panels broken at the kinks of both factors
                        std::vector<double> kinks = pa.knots;
                        for (double c : fa.knots) {
                            kinks.push_back(wrap_angle(c + shift));
                        }
                        kinks.push_back(0.0);
                        kinks.push_back(two_pi);
                        const auto breaks = clip_knots(kinks, 0.0, two_pi);
                        split = rule_from_breaks(distribute_panels(breaks, std::max(1, q_nodes / 8)), 8);
                    }
                    const Rule1D& r = split.size() ? split : qr;
                    double s = 0.0;
                    for (std::size_t j = 0; j < r.size(); ++j) {
                        s += r.w[j] * fa.value(wrap_angle(r.x[j] - shift)) * pa.value(r.x[j]);
                    }
                    v *= s;
                }
                return v;
            });
        }
        rules.insert(rules.end(), kr.begin(), kr.end());
        return integrate_tensor_parallel(rules, integrand);
    };
    // angle nodes doubled until the angular rule has settled
    int qn = opts.direct_q_nodes;
    auto first = run(panels, qn);
    double q_delta = 0.0;
    constexpr int max_q_nodes = 768;
    for (;;) {
        const auto finer = run(panels, 2 * qn);
        q_delta = std::abs(finer.sum() - first.sum());
        if (q_delta <= 0.1 * opts.tol * std::max(1.0, std::abs(finer.sum())) || 2 * qn > max_q_nodes) {
            break;
        }
        qn *= 2;
        first = finer;
    }
    double prev = first.sum();
    auto kp = panels;
    constexpr int max_doublings = 6;
    for (int level = 0; level < max_doublings; ++level) {
        kp = doubled(kp);
        const auto next = run(kp, qn);
        const double value = next.sum();
        const double delta = std::abs(value - prev);
        if (delta <= 0.1 * opts.tol * std::max(1.0, std::abs(value))) {
            return {value, delta + 2.0 * q_delta + next.rounding_error()};
        }
        prev = value;
    }
    throw NumericalFailure("phasemix::expectation_direct: k refinement did not converge", std::abs(prev));
}

// ---------------------------------------------------------------------------
// Deviation series and envelope fit

std::string to_string(Method m)
{
    return m == Method::direct ? "direct" : "spectral";
}

DeviationSeries deviation_series(const Model& model, const ScalarField& phi, const std::vector<double>& times,
                                 const DeviationOptions& opts)
{
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0) || (i > 0 && !(times[i] > times[i - 1]))) {
            throw ConfigError("phasemix::deviation_series: times must be nonnegative and strictly increasing");
        }
    }
    const auto& eo = opts.expectation;
    const Estimate limit = mixing_limit(model, phi, eo);
    DeviationSeries s;
    s.times = times;
    s.values.assign(times.size(), 0.0);
    s.errors.assign(times.size(), 0.0);
    s.limit = limit.value;
    s.method = Method::spectral;
    parallel_for(times.size(), [&](std::size_t i) {
        const double t = times[i];
        const Estimate spec = expectation_spectral(model, phi, t, eo);
        if (opts.cross_check && t <= eo.t_direct_max) {
            const Estimate dir = expectation_direct(model, phi, t, eo);
            const double gap = std::abs(spec.value - dir.value);
            if (gap > spec.err + dir.err) {
                throw NumericalFailure("phasemix::deviation_series: spectral and direct disagree at t = " +
                                           format_double(t) + " (gap " + format_double(gap) + ", error bars " +
                                           format_double(spec.err + dir.err) + ")",
                                       gap);
            }
        }
        s.values[i] = std::abs(spec.value - limit.value);
        s.errors[i] = spec.err + limit.err;
    });
    return s;
}

EnvelopeFit fit_envelope_exponent(const std::vector<double>& times, const std::vector<double>& values, double window)
{
    const std::size_t n = times.size();
    if (values.size() != n) {
        throw ConfigError("phasemix::fit_envelope_exponent: times and values differ in length");
    }
    if (!(window > 0)) {
        throw ConfigError("phasemix::fit_envelope_exponent: window must be positive");
    }
    if (n < 20) {
        throw PreconditionError("phasemix::fit_envelope_exponent: need at least 20 samples");
    }
    for (double t : times) {
        if (!(t > 0)) {
            throw PreconditionError("phasemix::fit_envelope_exponent: times must be positive");
        }
    }
    const double span = std::log10(times.back() / times.front());
    if (span < 1.5 - 1e-12) {
        throw PreconditionError("phasemix::fit_envelope_exponent: samples must span at least 1.5 decades");
    }
    if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; })) {
        throw PreconditionError("phasemix::fit_envelope_exponent: all-zero series has no defined exponent");
    }
    std::vector<double> lt(n);
    for (std::size_t i = 0; i < n; ++i) {
        lt[i] = std::log10(times[i]);
    }
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(lt[j] - lt[i]) <= 0.5 * window && values[j] > 0 &&
                (best == n || values[j] > values[best])) {
                best = j;
            }
        }
        if (best != n) {
            picks.push_back(best);
        }
    }
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    if (picks.size() < 3) {
        throw PreconditionError("phasemix::fit_envelope_exponent: fewer than three envelope points");
    }
    const double m = double(picks.size());
    double sx = 0, sy = 0;
    for (auto j : picks) {
        sx += std::log(times[j]);
        sy += std::log(values[j]);
    }
    const double mx = sx / m;
    const double my = sy / m;
    double sxx = 0, sxy = 0;
    for (auto j : picks) {
        const double dx = std::log(times[j]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(values[j]) - my);
    }
    EnvelopeFit fit;
    fit.slope = sxy / sxx;
    double ssr = 0;
    for (auto j : picks) {
        const double r = std::log(values[j]) - my - fit.slope * (std::log(times[j]) - mx);
        ssr += r * r;
    }
    fit.std_error = picks.size() > 2 ? std::sqrt(ssr / (m - 2) / sxx) : 0.0;
    fit.points = picks.size();
    return fit;
}

EnvelopeFit fit_envelope_exponent(const DeviationSeries& series, double window)
{
    return fit_envelope_exponent(series.times, series.values, window);
}

std::vector<double> log_spaced(double t_min, double t_max, int n)
{
    if (!(t_min > 0) || !(t_max > t_min) || n < 2) {
        throw ConfigError("phasemix::log_spaced: need 0 < t_min < t_max and n >= 2");
    }
    std::vector<double> t(n);
    const double a = std::log(t_min);
    const double b = std::log(t_max);
    for (int i = 0; i < n; ++i) {
        t[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
    }
    t.front() = t_min;
    t.back() = t_max;
    return t;
}

void write_csv(std::ostream& os, const DeviationSeries& series)
{
    write_csv_row(os, {"t", "D", "err", "limit", "method"});
    for (std::size_t i = 0; i < series.size(); ++i) {
        write_csv_row(os, {format_double(series.times[i]), format_double(series.values[i]),
                           format_double(series.errors[i]), format_double(series.limit), to_string(series.method)});
    }
}

} // namespace phasemix

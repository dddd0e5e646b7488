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
#include "phasemix/profiles.hpp"
#include "phasemix/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace phasemix {

// ---------------------------------------------------------------------------
// DomainBox

DomainBox::DomainBox(Vec lo_, Vec hi_, double padding_)
    : d(static_cast<int>(lo_.size())), lo(std::move(lo_)), hi(std::move(hi_)), padding(padding_)
{
    if (d < 1 || d > 3 || hi.size() != d) {
        throw ConfigError("phasemix::DomainBox: dimension must be 1, 2 or 3 with matching bounds");
    }
    if (padding < 0) {
        throw ConfigError("phasemix::DomainBox: padding must be nonnegative");
    }
    for (int i = 0; i < d; ++i) {
        if (!(lo[i] < hi[i])) {
            throw ConfigError("phasemix::DomainBox: lo must be below hi in every dimension");
        }
        if (!(2.0 * padding < hi[i] - lo[i])) {
            throw ConfigError("phasemix::DomainBox: padding leaves an empty interior");
        }
    }
}

DomainBox DomainBox::interval(double lo, double hi, double padding)
{
    return DomainBox(vec1(lo), vec1(hi), padding);
}

DomainBox DomainBox::cube(int d, double lo, double hi, double padding)
{
    return DomainBox(Vec::Constant(d, lo), Vec::Constant(d, hi), padding);
}

bool DomainBox::contains(const Vec& k) const
{
    if (k.size() != d) {
        return false;
    }
    for (int i = 0; i < d; ++i) {
        if (!(k[i] >= lo[i] && k[i] <= hi[i])) {
            return false;
        }
    }
    return true;
}

double DomainBox::volume() const
{
    return (hi - lo).prod();
}

DomainBox DomainBox::inner() const
{
    Vec l = lo.array() + padding;
    Vec h = hi.array() - padding;
    return DomainBox(l, h, 0.0);
}

std::optional<DomainBox> DomainBox::intersect(const DomainBox& other) const
{
    if (other.d != d) {
        throw ConfigError("phasemix::DomainBox::intersect: dimension mismatch");
    }
    Vec l = lo.cwiseMax(other.lo);
    Vec h = hi.cwiseMin(other.hi);
    for (int i = 0; i < d; ++i) {
        if (!(l[i] < h[i])) {
            return std::nullopt;
        }
    }
    return DomainBox(l, h, 0.0);
}

bool DomainBox::contains_box(const DomainBox& other, double slack) const
{
    for (int i = 0; i < d; ++i) {
        if (other.lo[i] < lo[i] - slack || other.hi[i] > hi[i] + slack) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// FrequencyMap helpers

double omega_prime(const FrequencyMap& freq, double k)
{
    return freq.jac(vec1(k))(0, 0);
}

double omega_second(const FrequencyMap& freq, double k)
{
    return freq.hess(vec1(k))[0](0, 0);
}

// ---------------------------------------------------------------------------
// Profiles

Profile1D bump_profile(double lo, double hi)
{
    if (!(lo < hi)) {
        throw ConfigError("phasemix::bump_profile: empty support");
    }
    const double c = 0.5 * (lo + hi);
    const double hw = 0.5 * (hi - lo);
    Profile1D p;
    p.value = [c, hw](double k) { return profiles::bump((k - c) / hw); };
    p.derivative = [c, hw](double k) { return profiles::bump_d1((k - c) / hw) / hw; };
    p.lo = lo;
    p.hi = hi;
    p.knots = {lo, hi};
    return p;
}

Profile1D plateau_profile(double lo, double hi, double ramp)
{
    if (!(ramp > 0) || !(2.0 * ramp <= hi - lo)) {
        throw ConfigError("phasemix::plateau_profile: need 0 < ramp <= (hi - lo) / 2");
    }
    Profile1D p;
    p.value = [lo, hi, ramp](double k) {
        if (k <= lo || k >= hi) {
            return 0.0;
        }
        if (k < lo + ramp) {
            return profiles::smoothstep((k - lo) / ramp);
        }
        if (k > hi - ramp) {
            return profiles::smoothstep((hi - k) / ramp);
        }
        return 1.0;
    };
    p.derivative = [lo, hi, ramp](double k) {
        if (k <= lo || k >= hi) {
            return 0.0;
        }
        if (k < lo + ramp) {
            return profiles::smoothstep_d1((k - lo) / ramp) / ramp;
        }
        if (k > hi - ramp) {
            return -profiles::smoothstep_d1((hi - k) / ramp) / ramp;
        }
        return 0.0;
    };
    p.lo = lo;
    p.hi = hi;
    p.knots = {lo, lo + ramp, hi - ramp, hi};
    return p;
}

Profile1D constant_profile(double lo, double hi)
{
    Profile1D p;
    p.value = [lo, hi](double k) { return (k >= lo && k <= hi) ? 1.0 : 0.0; };
    p.derivative = [](double) { return 0.0; };
    p.lo = lo;
    p.hi = hi;
    p.knots = {lo, hi};
    p.compact = false;
    return p;
}

Profile1D multiply(const Profile1D& p, std::function<double(double)> factor,
                   std::function<double(double)> factor_derivative,
                   const std::vector<double>& extra_knots)
{
    Profile1D out = p;
    auto f = p.value;
    auto df = p.derivative;
    out.value = [f, factor](double k) { return f(k) * factor(k); };
    out.derivative = [f, df, factor, factor_derivative](double k) {
        return df(k) * factor(k) + f(k) * factor_derivative(k);
    };
    std::vector<double> merged = p.knots;
    merged.insert(merged.end(), extra_knots.begin(), extra_knots.end());
    out.knots = clip_knots(merged, p.lo, p.hi);
    return out;
}

// ---------------------------------------------------------------------------
// Angular factors

Angular1D make_angular(std::function<double(double)> value)
{
    Angular1D a;
    a.value = std::move(value);
    const Rule1D rule = rule_from_breaks(distribute_panels(std::vector<double>{0.0, two_pi}, 256), 16);
    Accumulator<double> acc;
    double sup = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double v = a.value(rule.x[i]);
        acc.add(rule.w[i] * v);
        sup = std::max(sup, std::abs(v));
    }
    a.integral = acc.sum();
    a.abs_integral = abs_integral_periodic(a.value);
    a.sup_abs = sup;
    return a;
}

Angular1D angular_constant(double c)
{
    Angular1D a;
    a.value = [c](double) { return c; };
    a.integral = two_pi * c;
    a.abs_integral = two_pi * std::abs(c);
    a.sup_abs = std::abs(c);
    return a;
}

Angular1D angular_cosine(double offset, double amplitude, int mode, double phase)
{
    if (mode < 0) {
        throw ConfigError("phasemix::angular_cosine: mode must be nonnegative");
    }
    Angular1D a = make_angular([=](double q) { return offset + amplitude * std::cos(mode * q + phase); });
    if (mode > 0) {
        a.integral = two_pi * offset;
        a.sup_abs = std::abs(offset) + std::abs(amplitude);
    }
    return a;
}

Angular1D angular_bump(double center, double width)
{
    if (!(width > 0) || width > pi) {
        throw ConfigError("phasemix::angular_bump: width must lie in (0, pi]");
    }
    Angular1D a = make_angular([center, width](double q) {
        const double dist = wrap_angle(q - center + pi) - pi;
        return profiles::bump(dist / width);
    });
    a.knots = {wrap_angle(center - width), wrap_angle(center + width)};
    if (a.knots[0] == a.knots[1]) {
        a.knots.pop_back();
    }
    return a;
}

Angular1D angular_series(double a0, const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size()) {
        throw ConfigError("phasemix::angular_series: cosine and sine coefficient counts differ");
    }
    return make_angular([a0, a, b](double q) {
        double s = a0;
        for (std::size_t m = 0; m < a.size(); ++m) {
            const double x = double(m + 1) * q;
            s += a[m] * std::cos(x) + b[m] * std::sin(x);
        }
        return s;
    });
}

// ---------------------------------------------------------------------------
// SeparableParts

double SeparableParts::profile(const Vec& k) const
{
    double v = amplitude;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        v *= profiles[i].value(k[static_cast<Eigen::Index>(i)]);
    }
    return v;
}

Vec SeparableParts::profile_grad(const Vec& k) const
{
    const int d = static_cast<int>(profiles.size());
    Vec values(d);
    Vec derivs(d);
    for (int i = 0; i < d; ++i) {
        values[i] = profiles[i].value(k[i]);
        derivs[i] = profiles[i].derivative(k[i]);
    }
    Vec g(d);
    for (int i = 0; i < d; ++i) {
        double p = amplitude * derivs[i];
        for (int j = 0; j < d; ++j) {
            if (j != i) {
                p *= values[j];
            }
        }
        g[i] = p;
    }
    return g;
}

double SeparableParts::angular(const Vec& q) const
{
    double v = 1.0;
    for (std::size_t i = 0; i < angulars.size(); ++i) {
        v *= angulars[i].value(q[static_cast<Eigen::Index>(i)]);
    }
    return v;
}

double SeparableParts::angular_integral() const
{
    double v = 1.0;
    for (const auto& a : angulars) {
        v *= a.integral;
    }
    return v;
}

double SeparableParts::angular_abs_integral() const
{
    double v = 1.0;
    for (const auto& a : angulars) {
        v *= a.abs_integral;
    }
    return v;
}

double SeparableParts::angular_sup() const
{
    double v = 1.0;
    for (const auto& a : angulars) {
        v *= a.sup_abs;
    }
    return v;
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField make_separable_field(const DomainBox& domain, SeparableParts parts)
{
    const int d = domain.d;
    if (static_cast<int>(parts.profiles.size()) != d || static_cast<int>(parts.angulars.size()) != d) {
        throw ConfigError("phasemix::make_separable_field: need one profile and one angular factor per dimension");
    }
    Vec lo(d);
    Vec hi(d);
    const DomainBox inner = domain.inner();
    bool nonneg = parts.amplitude >= 0;
    for (int i = 0; i < d; ++i) {
        const Profile1D& p = parts.profiles[i];
        lo[i] = p.lo;
        hi[i] = p.hi;
        const DomainBox& allowed = p.compact ? inner : domain;
        if (p.lo < allowed.lo[i] - 1e-12 || p.hi > allowed.hi[i] + 1e-12) {
            throw ConfigError("phasemix::make_separable_field: support leaves the padded domain");
        }
        const Angular1D& a = parts.angulars[i];
        if (a.abs_integral - a.integral > 1e-12 * std::max(1.0, a.abs_integral)) {
            nonneg = false;
        }
    }
    auto shared = std::make_shared<const SeparableParts>(std::move(parts));
    ScalarField f;
    f.domain = domain;
    f.support = DomainBox(lo, hi, 0.0);
    f.value = [shared](const Vec& q, const Vec& k) { return shared->profile(k) * shared->angular(q); };
    f.grad_k = [shared](const Vec& q, const Vec& k) -> Vec { return shared->profile_grad(k) * shared->angular(q); };
    f.nonnegative = nonneg;
    for (int i = 0; i < d; ++i) {
        f.knots.push_back(clip_knots(shared->profiles[i].knots, lo[i], hi[i]));
    }
    f.separable = shared;
    return f;
}

ScalarField make_general_field(const DomainBox& domain, const DomainBox& support,
                               std::function<double(const Vec&, const Vec&)> value,
                               std::function<Vec(const Vec&, const Vec&)> grad_k, bool nonnegative,
                               std::vector<std::vector<double>> knots)
{
    if (support.d != domain.d || !domain.contains_box(support)) {
        throw ConfigError("phasemix::make_general_field: support must lie inside the domain");
    }
    ScalarField f;
    f.domain = domain;
    f.support = support;
    f.value = std::move(value);
    f.grad_k = std::move(grad_k);
    f.nonnegative = nonnegative;
    knots.resize(domain.d);
    for (int i = 0; i < domain.d; ++i) {
        f.knots.push_back(clip_knots(knots[i], support.lo[i], support.hi[i]));
    }
    return f;
}

ScalarField scaled(const ScalarField& field, double lambda)
{
    if (field.separable) {
        SeparableParts parts = *field.separable;
        parts.amplitude *= lambda;
        return make_separable_field(field.domain, std::move(parts));
    }
    auto v = field.value;
    auto g = field.grad_k;
    ScalarField out = field;
    out.value = [v, lambda](const Vec& q, const Vec& k) { return lambda * v(q, k); };
    out.grad_k = [g, lambda](const Vec& q, const Vec& k) -> Vec { return lambda * g(q, k); };
    out.nonnegative = field.nonnegative && lambda >= 0;
    return out;
}

ScalarField default_f0(const DomainBox& domain, double ramp)
{
    const DomainBox inner = domain.inner();
    SeparableParts parts;
    for (int i = 0; i < domain.d; ++i) {
        const double w = inner.hi[i] - inner.lo[i];
        const double c = 0.5 * (inner.hi[i] + inner.lo[i]);
        parts.profiles.push_back(plateau_profile(c - 0.25 * (w + 2 * domain.padding),
                                                 c + 0.25 * (w + 2 * domain.padding), ramp));
        parts.angulars.push_back(i == 0 ? angular_cosine(1.0, 1.0) : angular_constant(1.0));
    }
    return make_separable_field(domain, std::move(parts));
}

ScalarField default_phi(const DomainBox& domain)
{
    const DomainBox inner = domain.inner();
    SeparableParts parts;
    for (int i = 0; i < domain.d; ++i) {
        parts.profiles.push_back(bump_profile(inner.lo[i], inner.hi[i]));
        parts.angulars.push_back(i == 0 ? angular_cosine(1.0, 1.0) : angular_constant(1.0));
    }
    return make_separable_field(domain, std::move(parts));
}

// ---------------------------------------------------------------------------
// Catalog

namespace {

double take(const ParamTable& params, const std::string& key, double fallback)
{
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void check_keys(const std::string& name, const ParamTable& params, const std::set<std::string>& allowed)
{
    for (const auto& [key, value] : params) {
        if (!allowed.count(key)) {
            throw ConfigError("phasemix::make_builtin_model: unknown parameter '" + key + "' for model '" + name + "'");
        }
        if (!std::isfinite(value)) {
            throw ConfigError("phasemix::make_builtin_model: parameter '" + key + "' is not finite");
        }
    }
}

std::vector<Mat> zero_hess(int d)
{
    return std::vector<Mat>(d, Mat::Zero(d, d));
}

const std::set<std::string> common_keys{"lo", "hi", "padding", "ramp"};

std::set<std::string> allowed_keys(const std::string& name)
{
    std::set<std::string> keys = common_keys;
    if (name == "isochronous") {
        keys.insert("omega0");
    } else if (name == "quartic_osc_1st_order") {
        keys.insert("epsilon");
    } else if (name == "quadratic_degenerate") {
        keys.insert({"omega0", "kstar"});
    }
    return keys;
}

} // namespace

std::vector<std::string> builtin_model_names()
{
    return {"free_stream", "isochronous", "quartic_osc_1st_order", "quadratic_degenerate", "product_2d"};
}

DomainBox builtin_domain(const std::string& name, const ParamTable& params)
{
    if (name == "product_2d") {
        return DomainBox::cube(2, take(params, "lo", 0.5), take(params, "hi", 1.5), take(params, "padding", 0.05));
    }
    return DomainBox::interval(take(params, "lo", 0.0), take(params, "hi", 3.0), take(params, "padding", 0.1));
}

FrequencyMap make_builtin_frequency(const std::string& name, const ParamTable& params)
{
    const auto names = builtin_model_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ConfigError("phasemix::make_builtin_model: unknown model '" + name + "'");
    }
    check_keys(name, params, allowed_keys(name));
    FrequencyMap f;
    f.domain = builtin_domain(name, params);
    const int d = f.domain.d;

    if (name == "free_stream" || name == "product_2d") {
        f.omega = [](const Vec& k) -> Vec { return k; };
        f.jac = [d](const Vec&) -> Mat { return Mat::Identity(d, d); };
        f.hess = [d](const Vec&) { return zero_hess(d); };
        f.decoupled = true;
    } else if (name == "isochronous") {
        const double w0 = take(params, "omega0", 1.0);
        f.omega = [w0](const Vec&) -> Vec { return vec1(w0); };
        f.jac = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
        f.hess = [](const Vec&) { return zero_hess(1); };
        f.degeneracy = Degeneracy::everywhere;
    } else if (name == "quartic_osc_1st_order") {
        const double eps = take(params, "epsilon", 0.3);
        if (eps < 0) {
            throw ConfigError("phasemix::make_builtin_model: epsilon must be nonnegative");
        }
        if (f.domain.lo[0] < 0) {
            throw ConfigError("phasemix::make_builtin_model: actions must be nonnegative");
        }
        f.omega = [eps](const Vec& k) -> Vec { return vec1(1.0 + 3.0 * eps * k[0]); };
        f.jac = [eps](const Vec&) -> Mat { return Mat::Constant(1, 1, 3.0 * eps); };
        f.hess = [](const Vec&) { return zero_hess(1); };
        if (eps == 0.0) {
            f.degeneracy = Degeneracy::everywhere;
        }
    } else if (name == "quadratic_degenerate") {
        const double w0 = take(params, "omega0", 1.0);
        const double ks = take(params, "kstar", 0.5 * (f.domain.lo[0] + f.domain.hi[0]));
        if (!f.domain.inner().contains(vec1(ks))) {
            throw ConfigError("phasemix::make_builtin_model: kstar must lie inside the padded domain");
        }
        f.omega = [w0, ks](const Vec& k) -> Vec { return vec1(w0 + 0.5 * (k[0] - ks) * (k[0] - ks)); };
        f.jac = [ks](const Vec& k) -> Mat { return Mat::Constant(1, 1, k[0] - ks); };
        f.hess = [](const Vec&) { return std::vector<Mat>{Mat::Constant(1, 1, 1.0)}; };
        f.degenerate_points = {vec1(ks)};
        f.degeneracy = Degeneracy::isolated;
    }

    constexpr double second_derivative_floor = 1e-6;
    for (const Vec& k : f.degenerate_points) {
        if (std::abs(f.hess(k)[0](0, 0)) <= second_derivative_floor) {
            throw ConfigError("phasemix::make_builtin_model: omega'' vanishes at a declared degenerate point");
        }
    }
    return f;
}

Model make_builtin_model(const std::string& name, const ParamTable& params)
{
    Model m;
    m.freq = make_builtin_frequency(name, params);
    const double ramp = take(params, "ramp", 1e-3);
    m.f0 = default_f0(m.freq.domain, ramp);
    m.label = name;
    return m;
}

// ---------------------------------------------------------------------------
// Diagnostics

NondegeneracyReport check_nondegeneracy(const FrequencyMap& freq, int probes, std::optional<DomainBox> box)
{
    if (probes < 2) {
        throw ConfigError("phasemix::check_nondegeneracy: need at least two probes per dimension");
    }
    const DomainBox region = box ? *box : freq.domain.inner();
    const int d = region.d;
    NondegeneracyReport report;
    report.min_abs_det = std::numeric_limits<double>::infinity();
    std::vector<int> idx(d, 0);
    Vec k(d);
    for (;;) {
        for (int i = 0; i < d; ++i) {
            k[i] = region.lo[i] + (region.hi[i] - region.lo[i]) * double(idx[i]) / double(probes - 1);
        }
        const double det = std::abs(freq.jac(k).determinant());
        if (det < report.min_abs_det) {
            report.min_abs_det = det;
            report.argmin = k;
        }
        int i = d - 1;
        while (i >= 0 && ++idx[i] == probes) {
            idx[i] = 0;
            --i;
        }
        if (i < 0) {
            break;
        }
    }
    report.degenerate = report.min_abs_det < 1e-12;
    return report;
}

double jacobian_fd_error(const FrequencyMap& freq, int points, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const DomainBox region = freq.domain.inner();
    const int d = region.d;
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        Vec k(d);
        for (int i = 0; i < d; ++i) {
            std::uniform_real_distribution<double> u(region.lo[i], region.hi[i]);
            k[i] = u(rng);
        }
        const Mat jac = freq.jac(k);
        const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
        for (int j = 0; j < d; ++j) {
            Vec kp = k;
            Vec km = k;
            kp[j] += h;
            km[j] -= h;
            const Vec row = (freq.omega(kp) - freq.omega(km)) / (2 * h);
            for (int l = 0; l < d; ++l) {
                worst = std::max(worst, std::abs(row[l] - jac(j, l)) / scale);
            }
        }
    }
    return worst;
}

double gradient_fd_error(const ScalarField& field, int points, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const int d = field.dim();
    // the step is measured in units of the field's finest k-scale
    double finest = 1.0;
    for (const auto& kn : field.knots) {
        for (std::size_t i = 0; i + 1 < kn.size(); ++i) {
            finest = std::min(finest, kn[i + 1] - kn[i]);
        }
    }
    const double h = 1e-5 * finest;
    double worst = 0.0;
    double scale = 0.0;
    std::uniform_real_distribution<double> angle(0.0, two_pi);
    for (int p = 0; p < points; ++p) {
        Vec q(d);
        Vec k(d);
        for (int i = 0; i < d; ++i) {
            q[i] = angle(rng);
            std::uniform_real_distribution<double> u(field.support.lo[i], field.support.hi[i]);
            k[i] = u(rng);
        }
        const Vec g = field.grad_k(q, k);
        scale = std::max(scale, g.cwiseAbs().maxCoeff());
        double err = 0.0;
        for (int j = 0; j < d; ++j) {
            Vec kp = k;
            Vec km = k;
            kp[j] += h;
            km[j] -= h;
            const double fd = (field.value(q, kp) - field.value(q, km)) / (2 * h);
            err = std::max(err, std::abs(fd - g[j]));
        }
        worst = std::max(worst, err);
    }
    worst /= std::max(scale, 1e-300);
    return worst;
}

} // namespace phasemix

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
#include "phasemix/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace phasemix {

Rule1D rule_from_breaks(std::span<const double> breaks, int order)
{
    const auto& gl = gauss_legendre(order);
    Rule1D rule;
    if (breaks.size() < 2) {
        return rule;
    }
    rule.x.reserve((breaks.size() - 1) * order);
    rule.w.reserve((breaks.size() - 1) * order);
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p];
        const double b = breaks[p + 1];
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (int i = 0; i < order; ++i) {
            rule.x.push_back(mid + half * gl.nodes[i]);
            rule.w.push_back(half * gl.weights[i]);
        }
    }
    return rule;
}

std::vector<double> distribute_panels(std::span<const double> knots, int panels)
{
    std::vector<double> breaks;
    if (knots.size() < 2) {
        return breaks;
    }
    const double total = knots.back() - knots.front();
    breaks.push_back(knots.front());
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
        const double a = knots[s];
        const double b = knots[s + 1];
        const double share = total > 0 ? (b - a) / total : 1.0;
        const int n = std::max(1, static_cast<int>(std::ceil(share * panels - 1e-9)));
        for (int i = 1; i <= n; ++i) {
            breaks.push_back(i == n ? b : a + (b - a) * double(i) / double(n));
        }
    }
    return breaks;
}

std::vector<double> clip_knots(std::span<const double> knots, double lo, double hi)
{
    std::vector<double> out;
    out.push_back(lo);
    for (double k : knots) {
        if (k > lo && k < hi) {
            out.push_back(k);
        }
    }
    out.push_back(hi);
    std::sort(out.begin(), out.end());
    const double scale = std::max(1.0, std::abs(hi - lo));
    std::vector<double> unique;
    for (double k : out) {
        if (unique.empty() || k - unique.back() > 1e-14 * scale) {
            unique.push_back(k);
        }
    }
    if (unique.back() != hi) {
        unique.back() = hi;
    }
    return unique;
}

std::vector<double> graded_breaks(double a, double b, int panels, bool grade_left,
                                  bool grade_right, int levels)
{
    panels = std::max(panels, 1);
    const double h = (b - a) / panels;
    std::vector<double> out;
    for (int i = 0; i < panels; ++i) {
        out.push_back(a + h * double(i));
    }
    out.push_back(b);
    double s = h;
    for (int l = 0; l < levels; ++l) {
        s *= 0.5;
        if (grade_left) {
            out.push_back(a + s);
        }
        if (grade_right) {
            out.push_back(b - s);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> barycentric_weights(std::span<const double> nodes)
{
    const std::size_t n = nodes.size();
    std::vector<double> w(n, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (k != j) {
                w[j] /= (nodes[j] - nodes[k]);
            }
        }
    }
    return w;
}

double abs_integral_periodic(const std::function<double(double)>& f)
{
    // split at sign changes so every piece is smooth, then composite Gauss-Legendre
    constexpr int samples = 4096;
    std::vector<double> breaks{0.0};
    double prev_q = 0.0;
    double prev_v = f(0.0);
    for (int i = 1; i <= samples; ++i) {
        const double q = two_pi * double(i) / samples;
        const double v = f(q);
        if ((prev_v < 0 && v > 0) || (prev_v > 0 && v < 0)) {
            double a = prev_q;
            double b = q;
            double fa = prev_v;
            for (int it = 0; it < 80; ++it) {
                const double m = 0.5 * (a + b);
                const double fm = f(m);
                if ((fa < 0) == (fm < 0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            breaks.push_back(0.5 * (a + b));
        }
        prev_q = q;
        prev_v = v;
    }
    breaks.push_back(two_pi);
    const auto fine = distribute_panels(breaks, 256);
    const Rule1D rule = rule_from_breaks(fine, 16);
    Accumulator<double> acc;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        acc.add(rule.w[i] * std::abs(f(rule.x[i])));
    }
    return acc.sum();
}

} // namespace phasemix

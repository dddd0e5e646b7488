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
#pragma once

#include "phasemix/errors.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace phasemix {

// Gauss-Legendre nodes and weights on [-1, 1].
template <typename Scalar = double>
struct GaussLegendreRule {
    std::vector<Scalar> nodes;
    std::vector<Scalar> weights;
};

// Newton iteration on the Legendre recurrence; nodes accurate to a few ulp.
template <typename Scalar = double>
GaussLegendreRule<Scalar> compute_gauss_legendre(int n)
{
    if (n < 1) {
        throw ConfigError("phasemix::compute_gauss_legendre: n must be positive");
    }
    GaussLegendreRule<Scalar> rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        Scalar z = std::cos(Scalar(pi) * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
        Scalar dp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            Scalar p1 = 1;
            Scalar p2 = 0;
            for (int j = 1; j <= n; ++j) {
                const Scalar p3 = p2;
                p2 = p1;
                p1 = ((Scalar(2 * j - 1)) * z * p2 - Scalar(j - 1) * p3) / Scalar(j);
            }
            dp = Scalar(n) * (z * p1 - p2) / (z * z - Scalar(1));
            const Scalar dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) <= std::numeric_limits<Scalar>::epsilon()) {
                break;
            }
        }
        // one more derivative evaluation at the converged node
        Scalar p1 = 1;
        Scalar p2 = 0;
        for (int j = 1; j <= n; ++j) {
            const Scalar p3 = p2;
            p2 = p1;
            p1 = ((Scalar(2 * j - 1)) * z * p2 - Scalar(j - 1) * p3) / Scalar(j);
        }
        dp = Scalar(n) * (z * p1 - p2) / (z * z - Scalar(1));
        const Scalar w = Scalar(2) / ((Scalar(1) - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) {
        rule.nodes[n / 2] = 0;
    }
    return rule;
}

// Cached rule; the returned reference stays valid for the program lifetime.
template <typename Scalar = double>
const GaussLegendreRule<Scalar>& gauss_legendre(int n)
{
    static std::mutex mutex;
    static std::map<int, GaussLegendreRule<Scalar>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) {
        it = cache.emplace(n, compute_gauss_legendre<Scalar>(n)).first;
    }
    return it->second;
}

// A one-dimensional quadrature rule (absolute nodes and weights).
struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

// Composite Gauss-Legendre rule with `order` nodes on each panel [breaks[i], breaks[i+1]].
Rule1D rule_from_breaks(std::span<const double> breaks, int order);

// Panel break points over [knots.front(), knots.back()]: every knot is a break and
// `panels` panels are distributed over the pieces proportionally to length (at least
// one per piece). Knots must be sorted.
std::vector<double> distribute_panels(std::span<const double> knots, int panels);

// Sorted unique knots restricted to [lo, hi], always containing lo and hi.
std::vector<double> clip_knots(std::span<const double> knots, double lo, double hi);

// Break points over [a, b] with geometric grading (ratio 1/2, `levels` layers)
// toward each endpoint flagged in `grade_left` / `grade_right`.
std::vector<double> graded_breaks(double a, double b, int panels, bool grade_left,
                                  bool grade_right, int levels);

// Pairwise summation of a contiguous range.
template <typename T>
T pairwise_sum(std::span<const T> values)
{
    const std::size_t n = values.size();
    if (n <= 8) {
        T s{};
        for (const T& v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

// Streaming pairwise summation; deterministic for a fixed insertion order.
// Also tracks the sum of magnitudes, which bounds the rounding error.
template <typename T>
class Accumulator {
public:
    void add(const T& x)
    {
        block_.push_back(x);
        abs_sum_ += std::abs(x);
        if (block_.size() == block_size) {
            partials_.push_back(pairwise_sum(std::span<const T>(block_)));
            block_.clear();
        }
    }

    T sum() const
    {
        std::vector<T> all = partials_;
        all.push_back(pairwise_sum(std::span<const T>(block_)));
        return pairwise_sum(std::span<const T>(all));
    }

    double abs_sum() const { return abs_sum_; }

    // folds in a sum computed elsewhere (e.g. by another worker)
    void add_partial(const T& partial_sum, double partial_abs_sum)
    {
        partials_.push_back(partial_sum);
        abs_sum_ += partial_abs_sum;
    }

    // Conservative rounding estimate for the accumulated sum.
    double rounding_error() const
    {
        return 64.0 * std::numeric_limits<double>::epsilon() * abs_sum_;
    }

private:
    static constexpr std::size_t block_size = 1024;
    std::vector<T> block_;
    std::vector<T> partials_;
    double abs_sum_ = 0.0;
};

// Integral value with an error estimate.
struct Estimate {
    double value = 0.0;
    double err = 0.0;
};

// Tensor-product quadrature of f over the product of `rules`; f takes a Vec.
template <typename T, typename F>
Accumulator<T> integrate_tensor(const std::vector<Rule1D>& rules, F&& f)
{
    Accumulator<T> acc;
    const int d = static_cast<int>(rules.size());
    for (const Rule1D& r : rules) {
        if (r.size() == 0) {
            return acc;
        }
    }
    std::vector<std::size_t> idx(d, 0);
    Vec point(d);
    for (;;) {
        double w = 1.0;
        for (int i = 0; i < d; ++i) {
            point[i] = rules[i].x[idx[i]];
            w *= rules[i].w[idx[i]];
        }
        acc.add(T(w) * f(point));
        int i = d - 1;
        while (i >= 0) {
            if (++idx[i] < rules[i].size()) {
                break;
            }
            idx[i] = 0;
            --i;
        }
        if (i < 0) {
            break;
        }
    }
    return acc;
}

// Adaptive composite Gauss-Legendre over per-dimension knot lists: the panel count
// per dimension doubles until successive results differ by less than
// max(abs_tol, rel_tol * |value|). err is the last refinement delta plus rounding.
template <typename F>
Estimate integrate_box_adaptive(const std::vector<std::vector<double>>& knots, F&& f,
                                double rel_tol, double abs_tol, int start_panels = 4,
                                int max_doublings = 8, int order = 10)
{
    const int d = static_cast<int>(knots.size());
    auto evaluate = [&](int panels) {
        std::vector<Rule1D> rules;
        rules.reserve(d);
        for (int i = 0; i < d; ++i) {
            const auto breaks = distribute_panels(knots[i], panels);
            rules.push_back(rule_from_breaks(breaks, order));
        }
        return integrate_tensor<double>(rules, f);
    };
    int panels = start_panels;
    auto prev = evaluate(panels);
    double prev_value = prev.sum();
    for (int level = 0; level < max_doublings; ++level) {
        panels *= 2;
        const auto next = evaluate(panels);
        const double value = next.sum();
        const double delta = std::abs(value - prev_value);
        if (delta <= std::max(abs_tol, rel_tol * std::abs(value)) + next.rounding_error()) {
            return {value, delta + next.rounding_error()};
        }
        prev_value = value;
    }
    throw NumericalFailure("phasemix::integrate_box_adaptive: no convergence", std::abs(prev_value));
}

// Same sum as integrate_tensor, with the outermost dimension split over workers.
// Slots are combined in index order, so the result does not depend on the worker count.
template <typename F>
Accumulator<double> integrate_tensor_parallel(const std::vector<Rule1D>& rules, F&& f)
{
    Accumulator<double> acc;
    if (rules.empty() || rules.front().size() == 0) {
        return acc;
    }
    const std::size_t n0 = rules.front().size();
    const std::vector<Rule1D> inner(rules.begin() + 1, rules.end());
    std::vector<double> sums(n0, 0.0);
    std::vector<double> abs_sums(n0, 0.0);
    parallel_for(n0, [&](std::size_t i) {
        const double x0 = rules.front().x[i];
        const double w0 = rules.front().w[i];
        if (inner.empty()) {
            Vec p(1);
            p[0] = x0;
            const double v = w0 * f(p);
            sums[i] = v;
            abs_sums[i] = std::abs(v);
            return;
        }
        auto part = integrate_tensor<double>(inner, [&](const Vec& rest) {
            Vec p(rest.size() + 1);
            p[0] = x0;
            p.tail(rest.size()) = rest;
            return f(p);
        });
        sums[i] = w0 * part.sum();
        abs_sums[i] = w0 * part.abs_sum();
    });
    for (std::size_t i = 0; i < n0; ++i) {
        acc.add_partial(sums[i], abs_sums[i]);
    }
    return acc;
}

// Integral of |f| over one period [0, 2pi), split at the sign changes of f.
double abs_integral_periodic(const std::function<double(double)>& f);

// Barycentric Lagrange interpolation weights for the given nodes.
std::vector<double> barycentric_weights(std::span<const double> nodes);

} // namespace phasemix

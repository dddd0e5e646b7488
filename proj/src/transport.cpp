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
#include "phasemix/transport.hpp"

#include "phasemix/errors.hpp"
#include "phasemix/quadrature.hpp"

#include <cmath>

namespace phasemix {

namespace {

void check_point(const Model& model, const FlowPoint& p, const char* op)
{
    if (p.k.size() != model.freq.dim() || p.q.size() != model.freq.dim()) {
        throw ConfigError(std::string("phasemix::") + op + ": point dimension does not match the model");
    }
    if (!model.freq.domain.contains(p.k)) {
        throw DomainError(std::string("phasemix::") + op + ": action outside the model domain");
    }
}

Vec pulled_back(const Model& model, const FlowPoint& p)
{
    return advance_angles(model.freq, p.q, p.k, -p.t);
}

} // namespace

Vec advance_angles(const FrequencyMap& freq, const Vec& q, const Vec& k, double s)
{
    const Vec w = freq.omega(k);
    Vec out(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        // reduce the phase first so that |omega s| ~ 1e4 does not eat the angle's digits
        out[i] = wrap_angle(q[i] + wrap_angle(w[i] * s));
    }
    return out;
}

double evaluate_solution(const Model& model, const FlowPoint& p)
{
    check_point(model, p, "evaluate_solution");
    return model.f0.value(pulled_back(model, p), p.k);
}

double apply_W(const Model& model, const FlowPoint& p, int j, int n)
{
    if (n < 0) {
        throw ConfigError("phasemix::apply_W: n must be 0 or 1");
    }
    if (n > 1) {
        throw UnsupportedError("phasemix::apply_W: only n <= 1 is supported");
    }
    if (j < 0 || j >= model.freq.dim()) {
        throw ConfigError("phasemix::apply_W: index j out of range");
    }
    check_point(model, p, "apply_W");
    const Vec q0 = pulled_back(model, p);
    if (n == 0) {
        return model.f0.value(q0, p.k);
    }
    return model.f0.grad_k(q0, p.k)[j];
}

double conserved_integral(const Model& model, const std::function<double(const Vec&)>& g, int n,
                          double t, int j, const ConservedIntegralOptions& opts)
{
    if (n < 0 || n > 1) {
        throw UnsupportedError("phasemix::conserved_integral: only n in {0, 1} is supported");
    }
    const int d = model.freq.dim();
    if (j < 0 || j >= d) {
        throw ConfigError("phasemix::conserved_integral: index j out of range");
    }
    constexpr int order = 8;
    const ScalarField& f0 = model.f0;
    auto integrand = [&](const Vec& x) {
        const Vec q = x.head(d);
        const Vec k = x.tail(d);
        const FlowPoint p(t, q, k);
        const Vec q0 = pulled_back(model, p);
        const double v = n == 0 ? f0.value(q0, k) : f0.grad_k(q0, k)[j];
        return std::abs(v) * g(k);
    };
    // periodic trapezoid in q, panels in k; the two are refined separately
    auto evaluate = [&](int q_nodes, int k_nodes) {
        Rule1D qr;
        for (int i = 0; i < q_nodes; ++i) {
            qr.x.push_back(two_pi * i / q_nodes);
            qr.w.push_back(two_pi / q_nodes);
        }
        std::vector<Rule1D> rules(d, qr);
        for (int i = 0; i < d; ++i) {
            rules.push_back(rule_from_breaks(distribute_panels(f0.knots[i], std::max(1, k_nodes / order)), order));
        }
        return integrate_tensor_parallel(rules, integrand);
    };
    int qn = std::max(8, opts.start_nodes / 2);
    int kn = opts.start_nodes;
    double value = evaluate(qn, kn).sum();
    bool q_done = false;
    while (qn <= opts.max_nodes && kn <= opts.max_nodes) {
        if (!q_done) {
            const auto next = evaluate(2 * qn, kn);
            const double v = next.sum();
            q_done = std::abs(v - value) <= opts.rel_tol * std::abs(v) + next.rounding_error();
            qn *= 2;
            value = v;
            continue;
        }
        const auto next = evaluate(qn, 2 * kn);
        const double v = next.sum();
        if (std::abs(v - value) <= opts.rel_tol * std::abs(v) + next.rounding_error()) {
            return v;
        }
        kn *= 2;
        value = v;
    }
    throw NumericalFailure("phasemix::conserved_integral: no convergence at the node cap", std::abs(value));
}

} // namespace phasemix

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

#include "phasemix/core.hpp"

#include <functional>

namespace phasemix {

// A point (t, q, k) of the extended phase space; q is kept reduced into [0, 2pi).
struct FlowPoint {
    double t = 0.0;
    Vec q;
    Vec k;

    FlowPoint() = default;
    FlowPoint(double t_, const Vec& q_, const Vec& k_) : t(t_), q(wrap_angles(q_)), k(k_) {}
};

// Angles transported by the free flow: wrap(q + omega(k) s).
Vec advance_angles(const FrequencyMap& freq, const Vec& q, const Vec& k, double s);

// f(t, q, k) = f0(wrap(q - omega(k) t), k).
double evaluate_solution(const Model& model, const FlowPoint& p);

// (W_j)^n f at p, n in {0, 1}; W_j f = (d f0 / d k_j)(wrap(q - omega t), k).
// j counts from zero.
double apply_W(const Model& model, const FlowPoint& p, int j, int n);

struct ConservedIntegralOptions {
    int start_nodes = 32;
    int max_nodes = 1024;
    double rel_tol = 1e-8;
};

// int int |W_j^n f|(t, q, k) g(k) dq dk over T^d x supp f0, refined by doubling.
double conserved_integral(const Model& model, const std::function<double(const Vec&)>& g, int n,
                          double t, int j = 0, const ConservedIntegralOptions& opts = {});

} // namespace phasemix

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

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

namespace phasemix {

// Phase-space dimensions are small (d <= 3, q and k together <= 6), so vectors and matrices carry a
// fixed maximum size and never touch the heap.
inline constexpr int max_dim = 6;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, max_dim, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, max_dim, max_dim>;

using Vec = VecX<double>;
using Mat = MatX<double>;
using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Reduces an angle to its representative in [0, 2*pi).
template <typename Scalar>
Scalar wrap_angle(Scalar x)
{
    Scalar r = x - Scalar(two_pi) * std::floor(x / Scalar(two_pi));
    if (r >= Scalar(two_pi) || r < Scalar(0)) {
        r = Scalar(0);
    }
    return r;
}

template <typename Derived>
Vec wrap_angles(const Eigen::MatrixBase<Derived>& q)
{
    Vec out(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        out[i] = wrap_angle(double(q[i]));
    }
    return out;
}

inline Vec vec1(double x)
{
    Vec v(1);
    v[0] = x;
    return v;
}

inline Vec vec2(double x, double y)
{
    Vec v(2);
    v << x, y;
    return v;
}

} // namespace phasemix

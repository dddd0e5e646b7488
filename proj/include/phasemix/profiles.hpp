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

// Elementary C^2 profiles shared by fields, cutoffs and densities.

#include <cmath>

namespace phasemix::profiles {

// S(s) = 6s^5 - 15s^4 + 10s^3 clamped to [0, 1]; C^2 transition from 0 to 1.
template <typename Scalar>
Scalar smoothstep(Scalar s)
{
    if (s <= Scalar(0)) {
        return Scalar(0);
    }
    if (s >= Scalar(1)) {
        return Scalar(1);
    }
    return s * s * s * (Scalar(10) + s * (Scalar(-15) + Scalar(6) * s));
}

template <typename Scalar>
Scalar smoothstep_d1(Scalar s)
{
    if (s <= Scalar(0) || s >= Scalar(1)) {
        return Scalar(0);
    }
    const Scalar t = s * (Scalar(1) - s);
    return Scalar(30) * t * t;
}

template <typename Scalar>
Scalar smoothstep_d2(Scalar s)
{
    if (s <= Scalar(0) || s >= Scalar(1)) {
        return Scalar(0);
    }
    return Scalar(60) * s * (Scalar(1) - s) * (Scalar(1) - Scalar(2) * s);
}

// b(u) = (1 - u^2)^3 on |u| <= 1, zero outside.
template <typename Scalar>
Scalar bump(Scalar u)
{
    if (std::abs(u) >= Scalar(1)) {
        return Scalar(0);
    }
    const Scalar v = Scalar(1) - u * u;
    return v * v * v;
}

template <typename Scalar>
Scalar bump_d1(Scalar u)
{
    if (std::abs(u) >= Scalar(1)) {
        return Scalar(0);
    }
    const Scalar v = Scalar(1) - u * u;
    return Scalar(-6) * u * v * v;
}

// Cutoff profile: 1 on |u| <= 1/2, 0 on |u| >= 1, 1 - S(2|u| - 1) in between.
template <typename Scalar>
Scalar cutoff(Scalar u)
{
    const Scalar a = std::abs(u);
    if (a <= Scalar(0.5)) {
        return Scalar(1);
    }
    if (a >= Scalar(1)) {
        return Scalar(0);
    }
    return Scalar(1) - smoothstep(Scalar(2) * a - Scalar(1));
}

template <typename Scalar>
Scalar cutoff_d1(Scalar u)
{
    const Scalar a = std::abs(u);
    if (a <= Scalar(0.5) || a >= Scalar(1)) {
        return Scalar(0);
    }
    const Scalar sign = u < Scalar(0) ? Scalar(-1) : Scalar(1);
    return -Scalar(2) * sign * smoothstep_d1(Scalar(2) * a - Scalar(1));
}

template <typename Scalar>
Scalar cutoff_d2(Scalar u)
{
    const Scalar a = std::abs(u);
    if (a <= Scalar(0.5) || a >= Scalar(1)) {
        return Scalar(0);
    }
    return -Scalar(4) * smoothstep_d2(Scalar(2) * a - Scalar(1));
}

} // namespace phasemix::profiles

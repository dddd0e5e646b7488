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

#include <stdexcept>
#include <string>

namespace phasemix {

// Every error message starts with the operation that raised it, e.g.
// "phasemix::bound_1d: omega' vanishes on the effective support".

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters (CLI exit status 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A point outside the domain of a map or chart.
class DomainError : public Error {
public:
    using Error::Error;
};

// Quadrature or root finding failed to reach its tolerance (CLI exit status 2).
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, double estimate = 0.0)
        : Error(what), estimate_(estimate) {}
    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

// The frequency map is degenerate where a non-degenerate one is required.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Requested feature lies outside the supported range (e.g. W^n with n > 1).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

// The potential is not a single well on the search interval.
class NotAWellError : public Error {
public:
    using Error::Error;
};

// A property check or validation failed (CLI exit status 3).
class InvariantFailure : public Error {
public:
    using Error::Error;
};

} // namespace phasemix

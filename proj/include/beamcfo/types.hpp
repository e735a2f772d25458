// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace beamcfo {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cd kJ{0.0, 1.0};

/// Root of the error hierarchy. Every failure raised by the library derives from it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (matrix sizes, vector lengths).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Branch geometry cannot separate Doppler from oscillator offset (singular 2x2 system).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

/// Non-finite intermediate value or rank-deficient operator.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Quadrature refinement did not reach the requested tolerance.
/// The best estimate obtained is kept so callers can decide whether to use it.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double estimate, double achieved_rel_change)
        : Error(what), estimate_(estimate), achieved_(achieved_rel_change) {}

    double estimate() const noexcept { return estimate_; }
    double achieved_relative_change() const noexcept { return achieved_; }

private:
    double estimate_;
    double achieved_;
};

/// Requested problem would exceed the configured memory budget.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Configuration file or CLI input is malformed.
class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const char* what) {
    if (!cond) throw ParameterError(what);
}

inline void require_dims(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

}  // namespace detail

}  // namespace beamcfo

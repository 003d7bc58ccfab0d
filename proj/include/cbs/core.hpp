#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cbs {

inline constexpr const char* kVersion = "1.0.0";

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using Mat3c = Eigen::Matrix3cd;
using Mat2c = Eigen::Matrix2cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

/// Speed of light, cm/s.
inline constexpr double kSpeedOfLight = 2.99792458e10;

/// Quantum numbers that violate a documented range.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid run or Monte Carlo configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cbs

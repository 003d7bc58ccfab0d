#pragma once

#include <algorithm>
#include <cmath>

#include "cbs/core.hpp"

namespace cbs {

/// Euler angles (z-y-z, active) linking a ray frame to the lab frame.
struct EulerAngles {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Orthonormal triad attached to a ray: z along propagation, x and y span the
/// transverse plane and label the transverse indices 1 and 2.
struct RayFrame {
  Vec3 x = Vec3::UnitX();
  Vec3 y = Vec3::UnitY();
  Vec3 z = Vec3::UnitZ();

  static RayFrame from_euler(const EulerAngles& e) {
    const Mat3 r = (Eigen::AngleAxisd(e.alpha, Vec3::UnitZ()) *
                    Eigen::AngleAxisd(e.beta, Vec3::UnitY()) *
                    Eigen::AngleAxisd(e.gamma, Vec3::UnitZ()))
                       .toRotationMatrix();
    return {r.col(0), r.col(1), r.col(2)};
  }

  /// Frame with z along `direction` and gamma = 0.
  static RayFrame along(const Vec3& direction) {
    const double norm = direction.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw DomainError("ray direction must be a nonzero finite vector");
    const Vec3 u = direction / norm;
    const double beta = std::acos(std::clamp(u.z(), -1.0, 1.0));
    const double alpha = std::atan2(u.y(), u.x());
    RayFrame f = from_euler({alpha, beta, 0.0});
    f.z = u;
    return f;
  }

  EulerAngles euler() const {
    EulerAngles e;
    e.beta = std::acos(std::clamp(z.z(), -1.0, 1.0));
    if (std::abs(std::sin(e.beta)) > 1e-12) {
      e.alpha = std::atan2(z.y(), z.x());
      e.gamma = std::atan2(y.z(), -x.z());
    } else {
      // Only alpha + gamma (or alpha - gamma) is defined on the pole.
      e.alpha = 0.0;
      e.gamma = (z.z() > 0.0) ? std::atan2(x.y(), x.x()) : std::atan2(x.y(), -x.x());
    }
    return e;
  }

  bool is_orthonormal(double tol = 1e-10) const {
    return std::abs(x.norm() - 1.0) < tol && std::abs(y.norm() - 1.0) < tol &&
           std::abs(z.norm() - 1.0) < tol && std::abs(x.dot(y)) < tol &&
           std::abs(x.dot(z)) < tol && std::abs(y.dot(z)) < tol &&
           (x.cross(y) - z).norm() < tol;
  }

  /// 3x2 matrix whose columns are the transverse axes.
  Eigen::Matrix<double, 3, 2> transverse() const {
    Eigen::Matrix<double, 3, 2> f;
    f.col(0) = x;
    f.col(1) = y;
    return f;
  }

  /// Transverse circular unit vector of the ray, q = +-1.
  Vec3c circular(int q) const {
    const double s = 1.0 / std::sqrt(2.0);
    if (q == +1) return -s * (x.cast<Complex>() + kI * y.cast<Complex>());
    if (q == -1) return s * (x.cast<Complex>() - kI * y.cast<Complex>());
    throw DomainError("transverse circular index must be +-1");
  }
};

}  // namespace cbs

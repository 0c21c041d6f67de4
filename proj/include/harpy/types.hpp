// Common linear-algebra aliases and SO(3) helpers.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace harpy {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Generalized-velocity dimension: [p_dot_B(3); omega_B(3); 4 hip rates].
inline constexpr int kDof = 10;

using Vec10 = Eigen::Matrix<double, kDof, 1>;
using Mat10 = Eigen::Matrix<double, kDof, kDof>;
using Mat3x10 = Eigen::Matrix<double, 3, kDof>;
using Mat6x10 = Eigen::Matrix<double, 6, kDof>;
using Mat10x6 = Eigen::Matrix<double, kDof, 6>;
using Mat10x4 = Eigen::Matrix<double, kDof, 4>;

enum class Side { Left = 0, Right = 1 };

inline constexpr int index(Side s) { return static_cast<int>(s); }
inline constexpr double side_sign(Side s) { return s == Side::Left ? 1.0 : -1.0; }

/// Offsets into the generalized velocity vector.
namespace dof {
inline constexpr int kLinear = 0;
inline constexpr int kAngular = 3;
inline constexpr int kHipFrontal = 6;   // +0 left, +1 right
inline constexpr int kHipSagittal = 8;  // +0 left, +1 right

inline constexpr int hip_frontal(Side s) { return kHipFrontal + index(s); }
inline constexpr int hip_sagittal(Side s) { return kHipSagittal + index(s); }
}  // namespace dof

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline Mat3 rot_x(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}

inline Mat3 rot_y(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
}

inline Mat3 rot_z(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

/// Rodrigues formula, exp([w]x).
inline Mat3 so3_exp(const Vec3& w) {
  const double t2 = w.squaredNorm();
  const Mat3 W = hat(w);
  double a, b;
  if (t2 < 1e-12) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    const double t = std::sqrt(t2);
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t2;
  }
  return Mat3::Identity() + a * W + b * W * W;
}

/// Right Jacobian of SO(3): omega_body = Jr(theta) * theta_dot for R = R0 exp(theta).
inline Mat3 so3_right_jacobian(const Vec3& theta) {
  const double t2 = theta.squaredNorm();
  const Mat3 W = hat(theta);
  double a, b;
  if (t2 < 1e-10) {
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t = std::sqrt(t2);
    a = (1.0 - std::cos(t)) / t2;
    b = (t - std::sin(t)) / (t2 * t);
  }
  return Mat3::Identity() - a * W + b * W * W;
}

/// Inverse of the right Jacobian.
inline Mat3 so3_right_jacobian_inv(const Vec3& theta) {
  const double t2 = theta.squaredNorm();
  const Mat3 W = hat(theta);
  double c;
  if (t2 < 1e-10) {
    c = 1.0 / 12.0 + t2 / 720.0;
  } else {
    const double t = std::sqrt(t2);
    c = 1.0 / t2 - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  }
  return Mat3::Identity() + 0.5 * W + c * W * W;
}

/// Nearest rotation matrix (polar decomposition through SVD).
inline Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    out = U * svd.matrixV().transpose();
  }
  return out;
}

/// Roll, pitch, yaw from R = Rz(yaw) Ry(pitch) Rx(roll). Display and control error only.
struct EulerZYX {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

inline EulerZYX euler_zyx(const Mat3& R) {
  EulerZYX e;
  e.pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  e.roll = std::atan2(R(2, 1), R(2, 2));
  e.yaw = std::atan2(R(1, 0), R(0, 0));
  return e;
}

}  // namespace harpy

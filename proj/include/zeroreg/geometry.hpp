#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace zeroreg {

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Points3d = Points3<double>;

/// Proper rigid motion x -> R x + t.
template <typename Scalar>
struct RigidTransform {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static RigidTransform Identity() { return {}; }

  static RigidTransform FromParts(const Matrix3& r, const Vector3& t) {
    RigidTransform out;
    out.rotation = r;
    out.translation = t;
    return out;
  }

  Vector3 operator()(const Vector3& p) const { return rotation * p + translation; }

  template <typename Derived>
  Points3<Scalar> apply(const Eigen::MatrixBase<Derived>& points) const {
    return (rotation * points).colwise() + translation;
  }

  RigidTransform inverse() const {
    return FromParts(rotation.transpose(), -(rotation.transpose() * translation));
  }

  /// (a * b)(x) == a(b(x))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return FromParts(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
  }

  bool isValid(Scalar tol = Scalar(1e-6)) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Scalar ortho = (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }

  /// Row-major [R | t] as 12 values.
  std::array<Scalar, 12> toRowMajor12() const {
    std::array<Scalar, 12> v{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) v[r * 4 + c] = rotation(r, c);
      v[r * 4 + 3] = translation(r);
    }
    return v;
  }

  static RigidTransform FromRowMajor12(const std::array<Scalar, 12>& v) {
    RigidTransform out;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out.rotation(r, c) = v[r * 4 + c];
      out.translation(r) = v[r * 4 + 3];
    }
    return out;
  }

  template <typename Other>
  RigidTransform<Other> cast() const {
    return RigidTransform<Other>::FromParts(rotation.template cast<Other>(),
                                            translation.template cast<Other>());
  }
};

using RigidTransformd = RigidTransform<double>;

template <typename Scalar, typename Derived>
Points3<Scalar> apply_transform(const RigidTransform<Scalar>& transform,
                                const Eigen::MatrixBase<Derived>& points) {
  return transform.apply(points);
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, 3, 3> rotation_about_axis(const Eigen::Matrix<Scalar, 3, 1>& axis,
                                                Scalar radians) {
  return Eigen::AngleAxis<Scalar>(radians, axis.normalized()).toRotationMatrix();
}

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace zeroreg

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

namespace ffdasm {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// Wraps to [-pi, pi]; ties at the boundary map to +pi.
inline double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    double w = std::remainder(a, 2.0 * pi);
    if (w <= -pi) w = pi;
    return w;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d s;
    s << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
        -v.y(), v.x(), 0;
    return s;
}

// Quaternion increment for a world-frame angular velocity over h seconds.
inline Eigen::Quaterniond integrate_orientation(const Eigen::Quaterniond& q,
                                                const Eigen::Vector3d& omega_world,
                                                double h) {
    const double angle = omega_world.norm() * h;
    if (angle < 1e-300) return q;
    Eigen::Quaterniond dq(Eigen::AngleAxisd(angle, omega_world.normalized()));
    return (dq * q).normalized();
}

// Geodesic angle between two unit quaternions (sign-insensitive), radians.
inline double quat_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    double d = std::abs(a.dot(b));
    d = std::min(1.0, d);
    return 2.0 * std::acos(d);
}

}  // namespace ffdasm

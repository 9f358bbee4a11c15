#pragma once

// Test-only oracles, independent of the library's coupling-matrix and
// Jacobian code paths: body momenta by central finite differences of
// forward kinematics, plus a local rotation log map.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <vector>

#include "ffdasm/dynamics.hpp"

namespace ffdasm::testing {

// atan2 form stays accurate for the tiny rotations finite differences produce
inline Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
    const Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double sin_angle = v.norm() / 2.0;
    const double cos_angle = (r.trace() - 1.0) / 2.0;
    const double angle = std::atan2(sin_angle, cos_angle);
    if (sin_angle < 1e-300) return Eigen::Vector3d::Zero();
    return v * (angle / (2.0 * sin_angle));
}

struct BodyPose {
    double mass;
    Eigen::Vector3d com;
    Eigen::Matrix3d orientation;
    Eigen::Matrix3d inertia_local;
};

inline std::vector<BodyPose> body_poses(const KinematicChain& chain,
                                        const Eigen::Vector3d& base_pos,
                                        const Eigen::Quaterniond& base_quat,
                                        const Eigen::VectorXd& theta1,
                                        const Eigen::VectorXd& theta2) {
    Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
    base.translate(base_pos);
    base.rotate(base_quat);
    const ForwardKinematics fk = forward_kinematics(chain, base, theta1, theta2);
    std::vector<BodyPose> bodies;
    bodies.push_back({chain.base_mass, base_pos, base_quat.toRotationMatrix(), chain.base_inertia});
    auto add = [&](const ArmChain& arm, const ArmFrames& frames) {
        for (int j = 0; j < arm.dof(); ++j) {
            const auto& link = arm.links[static_cast<std::size_t>(j)];
            const auto& f = frames.joint_frames[static_cast<std::size_t>(j)];
            bodies.push_back({link.mass, f * link.com, f.linear(), link.inertia});
        }
    };
    add(chain.arm1, fk.arm1);
    add(chain.arm2, fk.arm2);
    return bodies;
}

struct MomentumSample {
    Eigen::Vector3d linear;
    Eigen::Vector3d angular;  // about the world origin
    double linear_scale;      // sum of per-body |m v|
    double angular_scale;
};

// Central finite differences over the state's own velocities.
inline MomentumSample momentum_by_finite_differences(const KinematicChain& chain,
                                                     const SystemState& s,
                                                     double eps = 1e-6) {
    auto advance = [&](double sign) {
        const Eigen::Vector3d pos = s.base_pos + sign * eps * s.base_lin_vel;
        Eigen::Quaterniond q = s.base_quat;
        const double angle = s.base_ang_vel.norm() * eps;
        if (angle > 0) {
            q = Eigen::Quaterniond(Eigen::AngleAxisd(sign * angle, s.base_ang_vel.normalized())) * q;
            q.normalize();
        }
        Eigen::VectorXd t1 = s.theta1 + sign * eps * s.theta_dot1;
        Eigen::VectorXd t2 = s.theta2 + sign * eps * s.theta_dot2;
        for (Eigen::Index i = 0; i < t1.size(); ++i) t1[i] = wrap_angle(t1[i]);
        for (Eigen::Index i = 0; i < t2.size(); ++i) t2[i] = wrap_angle(t2[i]);
        return body_poses(chain, pos, q, t1, t2);
    };
    const auto plus = advance(1.0);
    const auto minus = advance(-1.0);
    const auto mid = advance(0.0);

    MomentumSample out{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 0.0, 0.0};
    for (std::size_t k = 0; k < plus.size(); ++k) {
        const Eigen::Vector3d v = (plus[k].com - minus[k].com) / (2 * eps);
        // left difference gives the world-frame angular velocity directly
        const Eigen::Vector3d omega_world =
            rotation_log(plus[k].orientation * minus[k].orientation.transpose()) / (2 * eps);
        const Eigen::Matrix3d inertia_w =
            mid[k].orientation * mid[k].inertia_local * mid[k].orientation.transpose();
        const Eigen::Vector3d lin = mid[k].mass * v;
        const Eigen::Vector3d ang = inertia_w * omega_world + mid[k].com.cross(lin);
        out.linear += lin;
        out.angular += ang;
        out.linear_scale += lin.norm();
        out.angular_scale += (inertia_w * omega_world).norm() + mid[k].com.cross(lin).norm();
    }
    return out;
}

}  // namespace ffdasm::testing

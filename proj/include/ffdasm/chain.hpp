#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <vector>

#include "ffdasm/math_util.hpp"

namespace ffdasm {

/// One revolute link. The joint frame is reached by `offset` from the parent
/// joint frame, then rotated about `axis` by the joint angle; mass properties
/// are expressed in the rotated link frame.
struct LinkParams {
    Eigen::Isometry3d offset = Eigen::Isometry3d::Identity();
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    double mass = 1.0;
    Eigen::Vector3d com = Eigen::Vector3d::Zero();
    Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity() * 1e-2;  // about COM
};

struct ArmChain {
    Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();  // base frame -> first joint frame
    std::vector<LinkParams> links;                            // serial, each parented to the previous
    Eigen::Isometry3d ee_offset = Eigen::Isometry3d::Identity();  // last link frame -> end-effector
    int dof() const { return static_cast<int>(links.size()); }
};

/// Free-floating base with two serial arms. Base COM sits at the base frame
/// origin; base inertia is about that point in the base frame.
struct KinematicChain {
    double base_mass = 400.0;
    Eigen::Matrix3d base_inertia = Eigen::Matrix3d::Identity() * (400.0 / 6.0);
    ArmChain arm1, arm2;

    int dof() const { return arm1.dof() + arm2.dof(); }
    double total_mass() const;

    // Throws std::invalid_argument on non-positive masses, non-SPD inertias,
    // or non-unit joint axes.
    void validate() const;
};

/// Two UR5-like 6-DoF arms on a 400 kg cubic base (side 1 m), mounted on
/// opposite faces. Constants are config defaults, not calibrated values.
KinematicChain make_full_chain();

/// Planar 2+2-DoF debug configuration: all joint axes +z, links along the
/// local x axis, motion confined to the world x-y plane.
KinematicChain make_planar_chain(double l1 = 1.2, double l2 = 1.0,
                                 double m1 = 2.0, double m2 = 1.0,
                                 double base_mass = 100.0, double base_side = 0.6);

}  // namespace ffdasm

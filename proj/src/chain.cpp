#include "ffdasm/chain.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ffdasm {

namespace {

constexpr double kPi = std::numbers::pi;

// Thin-tube inertia about the COM for a link spanning `span` in its own frame.
Eigen::Matrix3d tube_inertia(double mass, const Eigen::Vector3d& span, double radius = 0.04) {
    const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d hull = 0.4 * mass * radius * radius * eye;
    const double len2 = span.squaredNorm();
    if (len2 < 1e-12) return hull;
    const Eigen::Vector3d u = span.normalized();
    return mass * len2 / 12.0 * (eye - u * u.transpose()) + hull;
}

// Standard DH fixed part: TransZ(d) * TransX(a) * RotX(alpha). The joint
// rotation about local z precedes it.
Eigen::Isometry3d dh_fixed(double d, double a, double alpha) {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.translate(Eigen::Vector3d(0, 0, d));
    t.translate(Eigen::Vector3d(a, 0, 0));
    t.rotate(Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitX()));
    return t;
}

ArmChain make_ur5_arm(const Eigen::Isometry3d& mount) {
    // UR5 standard DH constants.
    const double d[6] = {0.089159, 0.0, 0.0, 0.10915, 0.09465, 0.0823};
    const double a[6] = {0.0, -0.425, -0.39225, 0.0, 0.0, 0.0};
    const double alpha[6] = {kPi / 2, 0.0, 0.0, kPi / 2, -kPi / 2, 0.0};
    const double mass[6] = {3.7, 8.4, 2.3, 1.2, 1.2, 0.25};

    ArmChain arm;
    arm.mount = mount;
    Eigen::Isometry3d prev_fixed = Eigen::Isometry3d::Identity();
    for (int j = 0; j < 6; ++j) {
        LinkParams link;
        link.offset = prev_fixed;
        link.axis = Eigen::Vector3d::UnitZ();
        link.mass = mass[j];
        prev_fixed = dh_fixed(d[j], a[j], alpha[j]);
        const Eigen::Vector3d span(a[j], 0.0, d[j]);  // joint j -> joint j+1, link-j frame
        link.com = 0.5 * span;
        link.inertia = tube_inertia(mass[j], span);
        arm.links.push_back(link);
    }
    arm.ee_offset = prev_fixed;
    return arm;
}

void check_spd(const Eigen::Matrix3d& m, const char* what) {
    if ((m - m.transpose()).norm() > 1e-9 * std::max(1.0, m.norm()))
        throw std::invalid_argument(std::string(what) + ": inertia not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument(std::string(what) + ": inertia not positive definite");
}

}  // namespace

double KinematicChain::total_mass() const {
    double m = base_mass;
    for (const auto& l : arm1.links) m += l.mass;
    for (const auto& l : arm2.links) m += l.mass;
    return m;
}

void KinematicChain::validate() const {
    if (base_mass <= 0.0) throw std::invalid_argument("base mass must be positive");
    check_spd(base_inertia, "base");
    for (const ArmChain* arm : {&arm1, &arm2}) {
        if (arm->links.empty()) throw std::invalid_argument("arm has no links");
        for (const auto& l : arm->links) {
            if (l.mass <= 0.0) throw std::invalid_argument("link mass must be positive");
            if (std::abs(l.axis.norm() - 1.0) > 1e-12)
                throw std::invalid_argument("joint axis must be a unit vector");
            check_spd(l.inertia, "link");
        }
    }
}

KinematicChain make_full_chain() {
    KinematicChain chain;
    chain.base_mass = 400.0;
    const double side = 1.0;
    chain.base_inertia = Eigen::Matrix3d::Identity() * (chain.base_mass * side * side / 6.0);

    Eigen::Isometry3d mount1 = Eigen::Isometry3d::Identity();
    mount1.translate(Eigen::Vector3d(0.5, 0, 0));
    mount1.rotate(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitY()));
    Eigen::Isometry3d mount2 = Eigen::Isometry3d::Identity();
    mount2.translate(Eigen::Vector3d(-0.5, 0, 0));
    mount2.rotate(Eigen::AngleAxisd(-kPi / 2, Eigen::Vector3d::UnitY()));

    chain.arm1 = make_ur5_arm(mount1);
    chain.arm2 = make_ur5_arm(mount2);
    chain.validate();
    return chain;
}

KinematicChain make_planar_chain(double l1, double l2, double m1, double m2,
                                 double base_mass, double base_side) {
    KinematicChain chain;
    chain.base_mass = base_mass;
    chain.base_inertia =
        Eigen::Matrix3d::Identity() * (base_mass * base_side * base_side / 6.0);

    auto make_arm = [&](double mount_x) {
        ArmChain arm;
        arm.mount = Eigen::Isometry3d::Identity();
        arm.mount.translate(Eigen::Vector3d(mount_x, 0, 0));
        arm.mount.rotate(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ()));

        LinkParams first;
        first.offset = Eigen::Isometry3d::Identity();
        first.axis = Eigen::Vector3d::UnitZ();
        first.mass = m1;
        first.com = Eigen::Vector3d(l1 / 2, 0, 0);
        first.inertia = tube_inertia(m1, Eigen::Vector3d(l1, 0, 0));
        arm.links.push_back(first);

        LinkParams second;
        second.offset = Eigen::Isometry3d(Eigen::Translation3d(l1, 0, 0));
        second.axis = Eigen::Vector3d::UnitZ();
        second.mass = m2;
        second.com = Eigen::Vector3d(l2 / 2, 0, 0);
        second.inertia = tube_inertia(m2, Eigen::Vector3d(l2, 0, 0));
        arm.links.push_back(second);

        arm.ee_offset = Eigen::Isometry3d(Eigen::Translation3d(l2, 0, 0));
        return arm;
    };
    chain.arm1 = make_arm(base_side / 2);
    chain.arm2 = make_arm(-base_side / 2);
    chain.validate();
    return chain;
}

}  // namespace ffdasm

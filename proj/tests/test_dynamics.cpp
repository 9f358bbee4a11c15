#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "ffdasm/dynamics.hpp"
#include "test_oracles.hpp"

using namespace ffdasm;

namespace {

constexpr double kPi = std::numbers::pi;

// Debug chain used by the analytic examples: both arms mounted at the base
// origin, two links along local +x, joints about +z.
KinematicChain axis_aligned_planar(double l1 = 1.0, double l2 = 1.0) {
    KinematicChain chain = make_planar_chain(l1, l2, 2.0, 1.0, 50.0, 0.4);
    chain.arm1.mount = Eigen::Isometry3d::Identity();
    chain.arm2.mount = Eigen::Isometry3d::Identity();
    return chain;
}

Eigen::VectorXd vec2(double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); }

// Independent oracle: straight homogeneous-transform composition.
Eigen::Isometry3d compose_chain(const ArmChain& arm, const Eigen::Isometry3d& base,
                                const Eigen::VectorXd& theta) {
    Eigen::Isometry3d t = base * arm.mount;
    for (int j = 0; j < arm.dof(); ++j) {
        t = t * arm.links[static_cast<std::size_t>(j)].offset;
        t = t * Eigen::AngleAxisd(theta[j], arm.links[static_cast<std::size_t>(j)].axis);
    }
    return t * arm.ee_offset;
}

Simulator planar_simulator(double keepout = 0.15) {
    KinematicChain chain = make_planar_chain();
    ActuationLimits limits = ActuationLimits::uniform(chain.dof());
    limits.keepout_radius = keepout;
    return Simulator(chain, limits, SimParams{});
}

}  // namespace

TEST_CASE("forward_kinematics: straight-line and quarter-turn planar configurations") {
    const KinematicChain chain = axis_aligned_planar();
    const Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
    auto fk = forward_kinematics(chain, origin, vec2(0, 0), vec2(0, 0));
    CHECK((fk.arm1.ee.translation() - Eigen::Vector3d(2, 0, 0)).norm() < 1e-14);

    fk = forward_kinematics(chain, origin, vec2(kPi / 2, 0), vec2(0, 0));
    CHECK((fk.arm1.ee.translation() - Eigen::Vector3d(0, 2, 0)).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: matches transform-composition oracle on the full chain") {
    const KinematicChain chain = make_full_chain();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-kPi, kPi);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd t1(6), t2(6);
        for (int i = 0; i < 6; ++i) {
            t1[i] = uni(rng);
            t2[i] = uni(rng);
        }
        Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
        base.translate(Eigen::Vector3d(uni(rng), uni(rng), uni(rng)) * 0.1);
        base.rotate(Eigen::Quaterniond::UnitRandom());
        const auto fk = forward_kinematics(chain, base, t1, t2);
        const Eigen::Isometry3d o1 = compose_chain(chain.arm1, base, t1);
        const Eigen::Isometry3d o2 = compose_chain(chain.arm2, base, t2);
        CHECK((fk.arm1.ee.matrix() - o1.matrix()).norm() < 1e-12);
        CHECK((fk.arm2.ee.matrix() - o2.matrix()).norm() < 1e-12);
    }
}

TEST_CASE("forward_kinematics: rejects out-of-range angles") {
    const KinematicChain chain = axis_aligned_planar();
    CHECK_THROWS_AS(forward_kinematics(chain, Eigen::Isometry3d::Identity(), vec2(3.5, 0),
                                       vec2(0, 0)),
                    std::domain_error);
    CHECK_THROWS_AS(forward_kinematics(chain, Eigen::Isometry3d::Identity(),
                                       vec2(std::nan(""), 0), vec2(0, 0)),
                    std::domain_error);
}

TEST_CASE("compute_jacobians: zero rates give zero end-effector velocity") {
    Simulator sim = planar_simulator();
    const SystemState s = sim.make_state(vec2(0.3, -0.4), vec2(-0.2, 0.5));
    const JacobianSet jac = compute_jacobians(sim.chain(), s);
    const Vector6d twist = jac.arm1.base * s.base_twist() + jac.arm1.joints * s.theta_dot1;
    CHECK(twist.norm() < 1e-14);
}

TEST_CASE("compute_jacobians: analytic two-link planar Jacobian") {
    const KinematicChain chain = axis_aligned_planar(1.3, 0.7);
    const double t1 = 0.4, t2 = -0.9, l1 = 1.3, l2 = 0.7;
    Simulator sim(chain, ActuationLimits::uniform(chain.dof()), SimParams{});
    const SystemState s = sim.make_state(vec2(t1, t2), vec2(0, 0));
    const JacobianSet jac = compute_jacobians(chain, s);

    const double s1 = std::sin(t1), c1 = std::cos(t1);
    const double s12 = std::sin(t1 + t2), c12 = std::cos(t1 + t2);
    Eigen::Matrix2d analytic;
    analytic << -l1 * s1 - l2 * s12, -l2 * s12, l1 * c1 + l2 * c12, l2 * c12;
    CHECK((jac.arm1.joints.block<2, 2>(0, 0) - analytic).norm() < 1e-12);
}

TEST_CASE("compute_jacobians: finite-difference consistency on random states") {
    const KinematicChain chain = make_full_chain();
    Simulator sim(chain, ActuationLimits::uniform(chain.dof()), SimParams{});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.5, 1.5);
    const double h = 1e-6;

    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd t1(6), t2(6);
        for (int i = 0; i < 6; ++i) {
            t1[i] = uni(rng);
            t2[i] = uni(rng);
        }
        const SystemState s = sim.make_state(t1, t2);
        const JacobianSet jac = compute_jacobians(chain, s);

        Vector6d twist;
        Eigen::VectorXd rate1(6), rate2(6);
        for (int i = 0; i < 6; ++i) {
            twist[i] = uni(rng);
            rate1[i] = uni(rng);
            rate2[i] = uni(rng);
        }
        auto ee_at = [&](double sign) {
            Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
            base.translate(s.base_pos + sign * h * twist.head<3>());
            Eigen::Quaterniond q = s.base_quat;
            const double ang = twist.tail<3>().norm() * h;
            if (ang > 0)
                q = Eigen::Quaterniond(
                        Eigen::AngleAxisd(sign * ang, twist.tail<3>().normalized())) * q;
            base.rotate(q);
            const auto fk = forward_kinematics(chain, base, s.theta1 + sign * h * rate1,
                                               s.theta2 + sign * h * rate2);
            return std::make_pair(fk.arm1.ee, fk.arm2.ee);
        };
        const auto [p1, p2] = ee_at(1.0);
        const auto [m1, m2] = ee_at(-1.0);

        const Eigen::Vector3d v1_fd = (p1.translation() - m1.translation()) / (2 * h);
        const Eigen::Vector3d w1_fd =
            testing::rotation_log(p1.linear() * m1.linear().transpose()) / (2 * h);
        const Vector6d predicted = jac.arm1.base * twist + jac.arm1.joints * rate1;
        CHECK((predicted.head<3>() - v1_fd).norm() / std::max(1.0, v1_fd.norm()) < 1e-5);
        CHECK((predicted.tail<3>() - w1_fd).norm() / std::max(1.0, w1_fd.norm()) < 1e-5);

        const Eigen::Vector3d v2_fd = (p2.translation() - m2.translation()) / (2 * h);
        const Vector6d predicted2 = jac.arm2.base * twist + jac.arm2.joints * rate2;
        CHECK((predicted2.head<3>() - v2_fd).norm() / std::max(1.0, v2_fd.norm()) < 1e-5);
    }
}

TEST_CASE("compute_coupling_inertia: decoupled limit with near-massless arms") {
    KinematicChain chain = make_planar_chain(1.0, 1.0, 1e-9, 1e-9, 80.0, 0.5);
    Simulator sim(chain, ActuationLimits::uniform(chain.dof()), SimParams{});
    const SystemState s = sim.make_state(vec2(0.3, 0.7), vec2(-0.6, 0.1));
    const MomentumMatrices mats = compute_coupling_inertia(chain, s);
    CHECK(mats.h_arm1.norm() < 1e-7);
    CHECK(mats.h_arm2.norm() < 1e-7);
    Matrix6d expected = Matrix6d::Zero();
    expected.block<3, 3>(0, 0) = 80.0 * Eigen::Matrix3d::Identity();
    expected.block<3, 3>(3, 3) = chain.base_inertia;
    CHECK((mats.h_base - expected).norm() < 1e-6);
}

TEST_CASE("compute_coupling_inertia: momentum matches the per-body oracle") {
    Simulator sim = planar_simulator();
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    SystemState s = sim.make_state(vec2(uni(rng), uni(rng)), vec2(uni(rng), uni(rng)));
    s.base_lin_vel = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
    s.base_ang_vel = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
    s.theta_dot1 = vec2(uni(rng), uni(rng));
    s.theta_dot2 = vec2(uni(rng), uni(rng));

    const MomentumMatrices mats = compute_coupling_inertia(sim.chain(), s);
    const Vector6d from_mats =
        mats.h_base * s.base_twist() + mats.h_arm1 * s.theta_dot1 + mats.h_arm2 * s.theta_dot2;

    const auto oracle = testing::momentum_by_finite_differences(sim.chain(), s);
    // oracle reports angular momentum about the world origin; shift to base
    const Eigen::Vector3d l_base = oracle.angular - s.base_pos.cross(oracle.linear);
    CHECK((from_mats.head<3>() - oracle.linear).norm() < 1e-8 * std::max(1.0, oracle.linear_scale));
    CHECK((from_mats.tail<3>() - l_base).norm() < 1e-8 * std::max(1.0, oracle.angular_scale));
}

TEST_CASE("base_velocity_from_momentum: zero rates, linearity, Eq.(31) consistency") {
    Simulator sim = planar_simulator();
    const SystemState s0 = sim.make_state(vec2(0.4, -0.8), vec2(-0.3, 0.6));
    const MomentumMatrices mats = compute_coupling_inertia(sim.chain(), s0);

    CHECK(base_velocity_from_momentum(mats, vec2(0, 0), vec2(0, 0)).norm() == 0.0);

    const Eigen::VectorXd r1 = vec2(0.7, -0.2), r2 = vec2(0.1, 0.4);
    const Vector6d tw = base_velocity_from_momentum(mats, r1, r2);
    const Vector6d tw3 = base_velocity_from_momentum(mats, 3 * r1, 3 * r2);
    CHECK((tw3 - 3 * tw).norm() < 1e-12 * std::max(1.0, tw.norm()));

    // the twist must zero the total momentum
    const Vector6d mom = mats.h_base * tw + mats.h_arm1 * r1 + mats.h_arm2 * r2;
    CHECK(mom.norm() < 1e-10);

    // substituted into the end-effector velocity map, the closed form holds
    const JacobianSet jac = compute_jacobians(sim.chain(), s0);
    const Matrix6d hb_inv = mats.h_base.inverse();
    const Vector6d direct = jac.arm1.base * tw + jac.arm1.joints * r1;
    const Vector6d closed = -(jac.arm1.base * hb_inv * mats.h_arm1 - jac.arm1.joints) * r1 -
                            jac.arm1.base * hb_inv * mats.h_arm2 * r2;
    CHECK((direct - closed).norm() < 1e-10);
}

TEST_CASE("coupling symmetry: mirrored motion cancels lateral base reaction") {
    Simulator sim = planar_simulator();
    // mirror-symmetric configuration across the y-z plane
    const SystemState s = sim.make_state(vec2(0.5, -0.7), vec2(-0.5, 0.7));
    const MomentumMatrices mats = compute_coupling_inertia(sim.chain(), s);
    const Vector6d tw = base_velocity_from_momentum(mats, vec2(0.4, 0.9), vec2(-0.4, -0.9));
    CHECK(std::abs(tw[0]) < 1e-9);  // no lateral translation
    CHECK(std::abs(tw[5]) < 1e-9);  // no yaw
    CHECK(std::abs(tw[1]) > 1e-6);  // the symmetric component reacts
}

TEST_CASE("step: zero action from rest leaves the state unchanged") {
    Simulator sim = planar_simulator();
    const SystemState s0 = sim.make_state(vec2(0.2, 0.3), vec2(-0.1, 0.5));
    const SystemState s1 = sim.step(s0, Eigen::VectorXd::Zero(4), 0.05);
    CHECK((s1.theta1 - s0.theta1).norm() == 0.0);
    CHECK((s1.base_pos - s0.base_pos).norm() == 0.0);
    CHECK(s1.t == doctest::Approx(0.05));
}

TEST_CASE("step: executed rates respect the limit") {
    Simulator sim = planar_simulator();
    SystemState s = sim.make_state(vec2(0, 0.4), vec2(0, -0.4));
    const Eigen::VectorXd action = (Eigen::VectorXd(4) << -10.0, 0.0, 10.0, 0.0).finished();
    for (int i = 0; i < 40; ++i) {
        s = sim.step(s, action, 0.05);
        CHECK(s.theta_dot1.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
        CHECK(s.theta_dot2.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
        CHECK(s.theta1.cwiseAbs().maxCoeff() <= kPi);
    }
    // the lag actually converges to the clamped command
    CHECK(s.theta_dot1[0] < -0.9);
}

TEST_CASE("step: any arm motion from rest reacts on the base") {
    Simulator sim = planar_simulator();
    SystemState s = sim.make_state(vec2(0.7, 0.2), vec2(-0.1, -0.3));
    s = sim.step(s, (Eigen::VectorXd(4) << 0.8, 0, 0, 0).finished(), 0.05);
    CHECK(s.base_twist().norm() > 1e-6);
}

TEST_CASE("step: determinism is bit-exact, including noise under a fixed seed") {
    KinematicChain chain = make_planar_chain();
    ActuationLimits limits = ActuationLimits::uniform(chain.dof());
    SimParams params;
    params.noise_sigma = 0.01;
    Simulator a(chain, limits, params), b(chain, limits, params);
    a.seed(99);
    b.seed(99);
    SystemState sa = a.make_state(vec2(0.1, 0.2), vec2(0.3, 0.4));
    SystemState sb = b.make_state(vec2(0.1, 0.2), vec2(0.3, 0.4));
    const Eigen::VectorXd action = (Eigen::VectorXd(4) << 0.5, -0.5, 0.2, -0.2).finished();
    for (int i = 0; i < 10; ++i) {
        sa = a.step(sa, action, 0.05);
        sb = b.step(sb, action, 0.05);
    }
    CHECK((sa.theta1 - sb.theta1).norm() == 0.0);
    CHECK((sa.base_pos - sb.base_pos).norm() == 0.0);
    CHECK(sa.base_quat.coeffs() == sb.base_quat.coeffs());
}

TEST_CASE("step: keep-out violation freezes the state with the collision flag") {
    // wide base so the mounts sit outside the keep-out sphere
    KinematicChain chain = make_planar_chain(1.2, 1.0, 2.0, 1.0, 100.0, 2.4);
    ActuationLimits limits = ActuationLimits::uniform(chain.dof());
    limits.keepout_radius = 1.0;
    Simulator sim(chain, limits, SimParams{});
    SystemState s = sim.make_state(vec2(0, 0), vec2(0, 0));
    REQUIRE(!sim.in_keepout(s));
    StepInfo info;
    // sweep arm-1 across the base until the guard trips
    const Eigen::VectorXd inward = (Eigen::VectorXd(4) << 1.0, 0.0, 0.0, 0.0).finished();
    bool collided = false;
    SystemState before = s;
    for (int i = 0; i < 80 && !collided; ++i) {
        before = s;
        s = sim.step(s, inward, &info);
        collided = info.collision;
    }
    REQUIRE(collided);
    CHECK((s.theta1 - before.theta1).norm() == 0.0);
    CHECK(s.theta_dot1.norm() == 0.0);
    CHECK(s.t == doctest::Approx(before.t + 0.05));
}

TEST_CASE("momentum conservation: 1000-step random rollout stays at zero momentum") {
    Simulator sim = planar_simulator();
    sim.seed(7);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    SystemState s = sim.make_state(vec2(0.5, -1.0), vec2(-0.5, 1.0));
    double worst_lin = 0, worst_ang = 0;
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd action(4);
        for (int k = 0; k < 4; ++k) action[k] = uni(rng);
        s = sim.step(s, action, 0.05);
        if (i % 25 == 0) {
            const auto mom = testing::momentum_by_finite_differences(sim.chain(), s);
            worst_lin = std::max(worst_lin,
                                 mom.linear.norm() / std::max(1.0, mom.linear_scale));
            worst_ang = std::max(worst_ang,
                                 mom.angular.norm() / std::max(1.0, mom.angular_scale));
        }
    }
    CHECK(worst_lin < 1e-6);
    CHECK(worst_ang < 1e-6);
}

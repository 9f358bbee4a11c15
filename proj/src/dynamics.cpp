#include "ffdasm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ffdasm {

namespace {

void check_angles(const Eigen::VectorXd& theta, int expected) {
    if (theta.size() != expected)
        throw std::domain_error("joint angle vector has wrong length");
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double a = theta[i];
        if (!std::isfinite(a) || std::abs(a) > std::numbers::pi + 1e-12)
            throw std::domain_error("joint angle outside [-pi, pi]");
    }
}

ArmFrames arm_forward(const ArmChain& arm, const Eigen::Isometry3d& base_pose,
                      const Eigen::VectorXd& theta) {
    ArmFrames out;
    Eigen::Isometry3d cur = base_pose * arm.mount;
    for (int j = 0; j < arm.dof(); ++j) {
        const LinkParams& link = arm.links[static_cast<std::size_t>(j)];
        cur = cur * link.offset;
        out.joint_origins.push_back(cur.translation());
        out.joint_axes.push_back(cur.linear() * link.axis);
        cur = cur * Eigen::AngleAxisd(theta[j], link.axis);
        out.joint_frames.push_back(cur);
    }
    out.ee = cur * arm.ee_offset;
    return out;
}

struct BodyState {
    double mass;
    Eigen::Vector3d com;        // world
    Eigen::Matrix3d inertia_w;  // about COM, world axes
};

// Every body (base + links) with world-frame mass properties at a configuration.
std::vector<BodyState> collect_bodies(const KinematicChain& chain,
                                      const Eigen::Isometry3d& base_pose,
                                      const ForwardKinematics& fk) {
    std::vector<BodyState> bodies;
    bodies.push_back({chain.base_mass, base_pose.translation(),
                      base_pose.linear() * chain.base_inertia * base_pose.linear().transpose()});
    auto add_arm = [&](const ArmChain& arm, const ArmFrames& frames) {
        for (int j = 0; j < arm.dof(); ++j) {
            const LinkParams& link = arm.links[static_cast<std::size_t>(j)];
            const Eigen::Isometry3d& f = frames.joint_frames[static_cast<std::size_t>(j)];
            bodies.push_back({link.mass, f * link.com,
                              f.linear() * link.inertia * f.linear().transpose()});
        }
    };
    add_arm(chain.arm1, fk.arm1);
    add_arm(chain.arm2, fk.arm2);
    return bodies;
}

// Momentum [P; L_about_ref] produced by a unit twist of the whole system
// about `ref` (rigid-lock columns) -- used for the base block.
Matrix6d locked_inertia(const std::vector<BodyState>& bodies, const Eigen::Vector3d& ref) {
    Matrix6d h = Matrix6d::Zero();
    for (const auto& b : bodies) {
        const Eigen::Vector3d r = b.com - ref;
        const Eigen::Matrix3d rx = skew(r);
        h.block<3, 3>(0, 0) += b.mass * Eigen::Matrix3d::Identity();
        h.block<3, 3>(0, 3) += -b.mass * rx;
        h.block<3, 3>(3, 0) += b.mass * rx;
        h.block<3, 3>(3, 3) += b.inertia_w - b.mass * rx * rx;
    }
    return h;
}

}  // namespace

ForwardKinematics forward_kinematics(const KinematicChain& chain,
                                     const Eigen::Isometry3d& base_pose,
                                     const Eigen::VectorXd& theta1,
                                     const Eigen::VectorXd& theta2) {
    check_angles(theta1, chain.arm1.dof());
    check_angles(theta2, chain.arm2.dof());
    ForwardKinematics fk;
    fk.arm1 = arm_forward(chain.arm1, base_pose, theta1);
    fk.arm2 = arm_forward(chain.arm2, base_pose, theta2);
    return fk;
}

JacobianSet compute_jacobians(const KinematicChain& chain, const SystemState& state) {
    const ForwardKinematics fk =
        forward_kinematics(chain, state.base_pose(), state.theta1, state.theta2);
    auto arm_jac = [&](const ArmFrames& frames, int dof) {
        ArmJacobians j;
        const Eigen::Vector3d pe = frames.ee.translation();
        j.base.setIdentity();
        j.base.block<3, 3>(0, 3) = -skew(pe - state.base_pos);
        j.joints.resize(6, dof);
        for (int k = 0; k < dof; ++k) {
            const Eigen::Vector3d& z = frames.joint_axes[static_cast<std::size_t>(k)];
            const Eigen::Vector3d& o = frames.joint_origins[static_cast<std::size_t>(k)];
            j.joints.block<3, 1>(0, k) = z.cross(pe - o);
            j.joints.block<3, 1>(3, k) = z;
        }
        return j;
    };
    JacobianSet set;
    set.arm1 = arm_jac(fk.arm1, chain.arm1.dof());
    set.arm2 = arm_jac(fk.arm2, chain.arm2.dof());
    return set;
}

MomentumMatrices compute_coupling_inertia(const KinematicChain& chain, const SystemState& state) {
    const Eigen::Isometry3d base_pose = state.base_pose();
    const ForwardKinematics fk = forward_kinematics(chain, base_pose, state.theta1, state.theta2);
    const std::vector<BodyState> bodies = collect_bodies(chain, base_pose, fk);
    const Eigen::Vector3d ref = state.base_pos;

    MomentumMatrices mats;
    mats.h_base = locked_inertia(bodies, ref);

    // Joint-rate columns: a unit rate of joint k moves every body distal to it.
    auto arm_columns = [&](const ArmFrames& frames, int dof, std::size_t first_body) {
        Eigen::Matrix<double, 6, Eigen::Dynamic> h(6, dof);
        h.setZero();
        for (int k = 0; k < dof; ++k) {
            const Eigen::Vector3d& z = frames.joint_axes[static_cast<std::size_t>(k)];
            const Eigen::Vector3d& o = frames.joint_origins[static_cast<std::size_t>(k)];
            Eigen::Vector3d p = Eigen::Vector3d::Zero();
            Eigen::Vector3d l = Eigen::Vector3d::Zero();
            for (int j = k; j < dof; ++j) {
                const BodyState& b = bodies[first_body + static_cast<std::size_t>(j)];
                const Eigen::Vector3d v = z.cross(b.com - o);
                p += b.mass * v;
                l += b.inertia_w * z + b.mass * (b.com - ref).cross(v);
            }
            h.block<3, 1>(0, k) = p;
            h.block<3, 1>(3, k) = l;
        }
        return h;
    };
    mats.h_arm1 = arm_columns(fk.arm1, chain.arm1.dof(), 1);
    mats.h_arm2 = arm_columns(fk.arm2, chain.arm2.dof(),
                              1 + static_cast<std::size_t>(chain.arm1.dof()));
    return mats;
}

Vector6d base_velocity_from_momentum(const MomentumMatrices& mats,
                                     const Eigen::VectorXd& theta_dot1,
                                     const Eigen::VectorXd& theta_dot2) {
    const Vector6d rhs = mats.h_arm1 * theta_dot1 + mats.h_arm2 * theta_dot2;
    Eigen::LDLT<Matrix6d> solver(mats.h_base);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("base coupling inertia is singular");
    return -solver.solve(rhs);
}

ActuationLimits ActuationLimits::uniform(int dof, double angle, double rate) {
    ActuationLimits l;
    l.max_angle = Eigen::VectorXd::Constant(dof, angle);
    l.max_rate = Eigen::VectorXd::Constant(dof, rate);
    return l;
}

void ActuationLimits::validate(int dof) const {
    if (max_angle.size() != dof || max_rate.size() != dof)
        throw std::invalid_argument("limit vectors must match total dof");
    if (max_angle.minCoeff() <= 0 || max_rate.minCoeff() <= 0 || max_torque <= 0 ||
        kp <= 0 || kd <= 0 || keepout_radius <= 0)
        throw std::invalid_argument("limits must be strictly positive");
}

Simulator::Simulator(KinematicChain chain, ActuationLimits limits, SimParams params)
    : chain_(std::move(chain)), limits_(std::move(limits)), params_(params) {
    chain_.validate();
    limits_.validate(chain_.dof());
    if (params_.dt <= 0 || params_.substeps < 1)
        throw std::invalid_argument("dt must be positive, substeps >= 1");
}

SystemState Simulator::make_state(const Eigen::VectorXd& theta1, const Eigen::VectorXd& theta2,
                                  const Eigen::Vector3d& base_pos,
                                  const Eigen::Quaterniond& base_quat) const {
    SystemState s;
    s.base_pos = base_pos;
    s.base_quat = base_quat.normalized();
    s.theta1 = theta1;
    s.theta2 = theta2;
    s.theta_dot1 = Eigen::VectorXd::Zero(theta1.size());
    s.theta_dot2 = Eigen::VectorXd::Zero(theta2.size());
    const ForwardKinematics fk = forward_kinematics(chain_, s.base_pose(), theta1, theta2);
    s.p_e1 = fk.arm1.ee.translation();
    s.p_e2 = fk.arm2.ee.translation();
    return s;
}

bool Simulator::in_keepout(const SystemState& state) const {
    const ForwardKinematics fk =
        forward_kinematics(chain_, state.base_pose(), state.theta1, state.theta2);
    const double r2 = limits_.keepout_radius * limits_.keepout_radius;
    auto check_arm = [&](const ArmFrames& frames) {
        // 5 sample points per link segment, joint origin to next origin / EE.
        for (std::size_t j = 0; j < frames.joint_origins.size(); ++j) {
            const Eigen::Vector3d a = frames.joint_origins[j];
            const Eigen::Vector3d b = (j + 1 < frames.joint_origins.size())
                                          ? frames.joint_origins[j + 1]
                                          : frames.ee.translation();
            for (int k = 1; k <= 5; ++k) {
                const Eigen::Vector3d p = a + (b - a) * (static_cast<double>(k) / 5.0);
                if ((p - state.base_pos).squaredNorm() < r2) return true;
            }
        }
        return false;
    };
    return check_arm(fk.arm1) || check_arm(fk.arm2);
}

SystemState Simulator::step(const SystemState& state, const Eigen::VectorXd& action, double dt,
                            StepInfo* info) {
    if (dt <= 0) throw std::invalid_argument("dt must be positive");
    if (action.size() != dof())
        throw std::invalid_argument("action length does not match total dof");

    const int n1 = chain_.arm1.dof();
    const int n2 = chain_.arm2.dof();
    Eigen::VectorXd desired = action.cwiseMin(limits_.max_rate).cwiseMax(-limits_.max_rate);
    const double tau = limits_.kd / limits_.kp;  // critically damped velocity loop
    const double h = dt / params_.substeps;
    const double slew = limits_.max_torque * h;

    SystemState s = state;
    bool collided = false;
    for (int sub = 0; sub < params_.substeps; ++sub) {
        Eigen::VectorXd rate(dof());
        rate << s.theta_dot1, s.theta_dot2;
        Eigen::VectorXd delta = (desired - rate) * (1.0 - std::exp(-h / tau));
        delta = delta.cwiseMin(slew).cwiseMax(-slew);
        rate += delta;
        if (params_.noise_sigma > 0) {
            std::normal_distribution<double> gauss(0.0, params_.noise_sigma);
            for (Eigen::Index i = 0; i < rate.size(); ++i) rate[i] += gauss(rng_);
        }
        rate = rate.cwiseMin(limits_.max_rate).cwiseMax(-limits_.max_rate);
        s.theta_dot1 = rate.head(n1);
        s.theta_dot2 = rate.tail(n2);

        const MomentumMatrices mats = compute_coupling_inertia(chain_, s);
        const Vector6d twist = base_velocity_from_momentum(mats, s.theta_dot1, s.theta_dot2);
        s.base_lin_vel = twist.head<3>();
        s.base_ang_vel = twist.tail<3>();

        s.base_pos += h * s.base_lin_vel;
        s.base_quat = integrate_orientation(s.base_quat, s.base_ang_vel, h);
        auto advance = [&](Eigen::VectorXd& th, Eigen::VectorXd& thd, int offset) {
            for (Eigen::Index i = 0; i < th.size(); ++i) {
                th[i] = wrap_angle(th[i] + h * thd[i]);
                const double stop = limits_.max_angle[offset + i];
                if (std::abs(th[i]) > stop) {  // mechanical stop
                    th[i] = std::clamp(th[i], -stop, stop);
                    thd[i] = 0.0;
                }
            }
        };
        advance(s.theta1, s.theta_dot1, 0);
        advance(s.theta2, s.theta_dot2, n1);

        if (in_keepout(s)) {
            collided = true;
            break;
        }
    }

    if (collided) {
        s = state;
        s.theta_dot1.setZero();
        s.theta_dot2.setZero();
        s.base_lin_vel.setZero();
        s.base_ang_vel.setZero();
    } else {
        // Re-solve the base twist at the final configuration so the stored
        // state is momentum-consistent on its own.
        const MomentumMatrices mats = compute_coupling_inertia(chain_, s);
        const Vector6d twist = base_velocity_from_momentum(mats, s.theta_dot1, s.theta_dot2);
        s.base_lin_vel = twist.head<3>();
        s.base_ang_vel = twist.tail<3>();
        const ForwardKinematics fk = forward_kinematics(chain_, s.base_pose(), s.theta1, s.theta2);
        s.p_e1 = fk.arm1.ee.translation();
        s.p_e2 = fk.arm2.ee.translation();
    }
    if (!s.base_pos.allFinite() || !s.theta1.allFinite() || !s.theta2.allFinite())
        throw std::runtime_error("non-finite state after integration");
    s.t = state.t + dt;
    if (info) info->collision = collided;
    return s;
}

}  // namespace ffdasm

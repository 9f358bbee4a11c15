#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <optional>
#include <random>
#include <vector>

#include "ffdasm/chain.hpp"
#include "ffdasm/math_util.hpp"

namespace ffdasm {

struct SystemState {
    Eigen::Vector3d base_pos = Eigen::Vector3d::Zero();
    Eigen::Quaterniond base_quat = Eigen::Quaterniond::Identity();
    Eigen::Vector3d base_lin_vel = Eigen::Vector3d::Zero();   // world frame
    Eigen::Vector3d base_ang_vel = Eigen::Vector3d::Zero();   // world frame
    Eigen::VectorXd theta1, theta2;
    Eigen::VectorXd theta_dot1, theta_dot2;
    Eigen::Vector3d p_e1 = Eigen::Vector3d::Zero();
    Eigen::Vector3d p_e2 = Eigen::Vector3d::Zero();
    double t = 0.0;

    Vector6d base_twist() const {
        Vector6d v;
        v << base_lin_vel, base_ang_vel;
        return v;
    }
    Eigen::Isometry3d base_pose() const {
        Eigen::Isometry3d p = Eigen::Isometry3d::Identity();
        p.translate(base_pos);
        p.rotate(base_quat);
        return p;
    }
};

/// World poses along one arm, evaluated at a configuration.
struct ArmFrames {
    std::vector<Eigen::Isometry3d> joint_frames;  // frame after each joint rotation
    Eigen::Isometry3d ee;
    std::vector<Eigen::Vector3d> joint_origins;   // world position of each joint
    std::vector<Eigen::Vector3d> joint_axes;      // world direction of each joint axis
};

struct ForwardKinematics {
    ArmFrames arm1, arm2;
};

/// End-effector twist maps: twist_e = base * base_twist + joints * theta_dot.
struct ArmJacobians {
    Matrix6d base;                          // 6x6
    Eigen::Matrix<double, 6, Eigen::Dynamic> joints;  // 6 x dof
};

struct JacobianSet {
    ArmJacobians arm1, arm2;
};

/// Total momentum about the base origin (world axes) as a linear map:
/// [P; L] = h_base * base_twist + h_arm1 * theta_dot1 + h_arm2 * theta_dot2.
struct MomentumMatrices {
    Matrix6d h_base;
    Eigen::Matrix<double, 6, Eigen::Dynamic> h_arm1, h_arm2;
};

/// Throws std::domain_error if any angle is non-finite or outside [-pi, pi].
ForwardKinematics forward_kinematics(const KinematicChain& chain,
                                     const Eigen::Isometry3d& base_pose,
                                     const Eigen::VectorXd& theta1,
                                     const Eigen::VectorXd& theta2);

JacobianSet compute_jacobians(const KinematicChain& chain, const SystemState& state);

MomentumMatrices compute_coupling_inertia(const KinematicChain& chain, const SystemState& state);

/// Base twist that zeroes total momentum for the given joint rates.
Vector6d base_velocity_from_momentum(const MomentumMatrices& mats,
                                     const Eigen::VectorXd& theta_dot1,
                                     const Eigen::VectorXd& theta_dot2);

struct ActuationLimits {
    Eigen::VectorXd max_angle;  // U_theta, per joint (rad)
    Eigen::VectorXd max_rate;   // U_theta_dot, per joint (rad/s)
    double max_torque = 20.0;   // bounds joint-rate slew per unit inertia (rad/s^2)
    double kp = 40.0;
    double kd = 2.0;
    double keepout_radius = 0.25;  // sphere around the base centroid

    static ActuationLimits uniform(int dof, double angle = std::numbers::pi, double rate = 1.0);
    void validate(int dof) const;
};

struct SimParams {
    double dt = 0.05;
    int substeps = 4;
    double noise_sigma = 0.0;  // optional Gaussian delta on executed joint rates
};

struct StepInfo {
    bool collision = false;
};

/// Velocity-resolved free-floating simulator. Joint velocities track the
/// clamped command through a first-order lag (time constant kd/kp); the base
/// twist is re-solved from momentum conservation every substep. One instance
/// per thread.
class Simulator {
public:
    Simulator(KinematicChain chain, ActuationLimits limits, SimParams params);

    const KinematicChain& chain() const { return chain_; }
    const ActuationLimits& limits() const { return limits_; }
    const SimParams& params() const { return params_; }

    void seed(std::uint64_t s) { rng_.seed(s); }

    /// Zero-velocity state at the given configuration with refreshed
    /// end-effector positions and momentum-consistent (zero) base twist.
    SystemState make_state(const Eigen::VectorXd& theta1, const Eigen::VectorXd& theta2,
                           const Eigen::Vector3d& base_pos = Eigen::Vector3d::Zero(),
                           const Eigen::Quaterniond& base_quat = Eigen::Quaterniond::Identity()) const;

    /// Advances one control step with desired joint velocities (length dof()).
    /// On a keep-out violation the returned state freezes at the previous
    /// configuration with zeroed rates and the collision flag set.
    SystemState step(const SystemState& state, const Eigen::VectorXd& action, double dt,
                     StepInfo* info = nullptr);
    SystemState step(const SystemState& state, const Eigen::VectorXd& action,
                     StepInfo* info = nullptr) {
        return step(state, action, params_.dt, info);
    }

    int dof() const { return chain_.dof(); }
    bool in_keepout(const SystemState& state) const;

private:
    KinematicChain chain_;
    ActuationLimits limits_;
    SimParams params_;
    std::mt19937_64 rng_{0};
};

}  // namespace ffdasm

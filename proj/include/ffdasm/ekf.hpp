#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ffdasm {

/// Rotation-plane frame: right-handed orthonormal basis {u, v, n_r} with the
/// circle center c in the plane and the axial offset h along n_r.
struct PlaneFrame {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // n_r, unit
    Eigen::Vector3d center = Eigen::Vector3d::Zero(); // c, axial coordinate zero
    Eigen::Vector3d u = Eigen::Vector3d::UnitX();
    Eigen::Vector3d v = Eigen::Vector3d::UnitY();
    double axial_offset = 0.0;                        // h
    double radius = 0.0;                              // fitted circle radius
};

/// Least-squares circle fit of the observations projected on the plane
/// perpendicular to n_r; u is the normalized rejection of the least-aligned
/// world axis, v = n_r x u. Throws on collinear observations.
PlaneFrame build_plane_frame(const Eigen::Vector3d& axis,
                             const std::vector<Eigen::Vector3d>& observations);

Eigen::Vector2d project(const Eigen::Vector3d& p, const PlaneFrame& frame);
Eigen::Vector3d lift(double x, double y, const PlaneFrame& frame);

/// Planar circular-motion EKF over X = [x, y, varsigma, v]: position in the
/// rotation plane, velocity heading, speed; the heading advances at the
/// supplied spin-rate input.
class TargetEkf {
public:
    struct Params {
        Eigen::Matrix4d process_noise =
            (Eigen::Vector4d(1e-6, 1e-6, 1e-5, 1e-5)).asDiagonal();
        Eigen::Matrix2d measurement_noise = Eigen::Matrix2d::Identity() * 2.5e-5;
        Eigen::Matrix4d initial_covariance =
            (Eigen::Vector4d(0.01, 0.01, 0.1, 0.1)).asDiagonal();
        double dt = 0.05;  // control cycle
    };

    TargetEkf() = default;
    explicit TargetEkf(const Params& params) : params_(params) { covariance_ = params.initial_covariance; }

    const Eigen::Vector4d& state() const { return state_; }
    const Eigen::Matrix4d& covariance() const { return covariance_; }
    double spin_rate() const { return spin_rate_; }
    void set_spin_rate(double rate) { spin_rate_ = rate; }
    bool initialized() const { return init_stage_ >= 2; }

    void set_state(const Eigen::Vector4d& x, const Eigen::Matrix4d& p) {
        state_ = x;
        covariance_ = p;
        init_stage_ = 2;
    }

    /// First measurement fixes position; the second fixes the heading and
    /// speed (radius * spin rate).
    void initialize(const Eigen::Vector2d& measurement, double circle_radius);

    static Eigen::Vector4d motion_model(const Eigen::Vector4d& x, double spin_rate, double dt);
    static Eigen::Matrix4d motion_jacobian(const Eigen::Vector4d& x, double dt);

    void predict();

    /// Correction against the current (predicted) state: innovation
    /// Z - h(X), Joseph-form covariance update. Throws if the innovation
    /// covariance is singular or the measurement is non-finite.
    void update(const Eigen::Vector2d& measurement);

    /// One-step-ahead planar position (does not mutate the filter).
    Eigen::Vector2d predict_ahead() const;

private:
    Params params_;
    Eigen::Vector4d state_ = Eigen::Vector4d::Zero();
    Eigen::Matrix4d covariance_ = Eigen::Matrix4d::Identity() * 0.01;
    double spin_rate_ = 0.0;
    int init_stage_ = 0;
    Eigen::Vector2d first_meas_ = Eigen::Vector2d::Zero();
};

/// Lifted one-step-ahead target prediction, the goal fed to the planner.
Eigen::Vector3d predict_target(const TargetEkf& ekf, const PlaneFrame& frame);

}  // namespace ffdasm

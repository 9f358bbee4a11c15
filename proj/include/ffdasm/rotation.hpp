#pragma once

#include <Eigen/Dense>
#include <random>
#include <tuple>
#include <vector>

#include "ffdasm/pointcloud.hpp"

namespace ffdasm {

/// Nearest proper rotation (SVD projection, reflection excluded).
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle);

/// Uniform over the rotation group; with max_angle < pi, the conditional of
/// the uniform distribution on angle <= max_angle (rejection).
Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle = -1.0);

struct RotationEstimate {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    double angle = 0.0;          // [0, pi]
    double angular_rate = 0.0;   // filled once a frame interval is known
    bool degenerate = false;     // angle ~ 0, axis undefined
};

/// cloud_b = r_true * cloud_a pointwise (normals rotated consistently),
/// with optional extra position noise on cloud_b.
std::tuple<PointCloud, PointCloud, Eigen::Matrix3d> make_rotation_pair(
    const PointCloud& cloud, std::mt19937_64& rng, double noise_sigma = 0.0,
    double max_angle = -1.0);

/// Least-squares proper rotation between corresponding clouds. Throws on
/// size mismatch, fewer than 3 points, or collinear geometry.
Eigen::Matrix3d kabsch_estimate(const PointCloud& cloud_a, const PointCloud& cloud_b);

/// Rotation angle between two rotations: 2 asin(||Ra - Rb||_F / (2 sqrt 2)).
double geodesic_loss(const Eigen::Matrix3d& r_a, const Eigen::Matrix3d& r_b);

/// Angle from the trace, axis from the skew part away from the degeneracies;
/// eigen-decomposition fallback near pi, degenerate flag near zero.
RotationEstimate axis_angle_from_rotation(const Eigen::Matrix3d& r);

struct RateEstimate {
    double rate = 0.0;           // rad/s, median angle / frame interval
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    int used_frames = 0;
};

/// Consensus spin rate and axis over per-interval estimates; degenerate
/// frames are skipped, axis signs aligned before averaging. Throws if every
/// frame is degenerate.
RateEstimate angular_rate(const std::vector<RotationEstimate>& frames, double frame_interval);

}  // namespace ffdasm

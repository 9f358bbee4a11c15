#include "ffdasm/rotation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ffdasm {

namespace {
constexpr double kPi = std::numbers::pi;
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant();
    return svd.matrixU() * d * svd.matrixV().transpose();
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        if (q.norm() < 1e-12) continue;
        q.normalize();
        if (max_angle > 0) {
            const double angle = 2.0 * std::acos(std::min(1.0, std::abs(q.w())));
            if (angle > max_angle) continue;
        }
        return q.toRotationMatrix();
    }
    throw std::runtime_error("random_rotation: rejection sampling failed");
}

std::tuple<PointCloud, PointCloud, Eigen::Matrix3d> make_rotation_pair(
    const PointCloud& cloud, std::mt19937_64& rng, double noise_sigma, double max_angle) {
    const Eigen::Matrix3d r = random_rotation(rng, max_angle);
    PointCloud b;
    b.points = r * cloud.points;
    b.normals = r * cloud.normals;
    if (noise_sigma > 0) {
        std::normal_distribution<double> gauss(0.0, noise_sigma);
        for (int i = 0; i < b.size(); ++i)
            b.points.col(i) += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }
    return {cloud, b, r};
}

Eigen::Matrix3d kabsch_estimate(const PointCloud& cloud_a, const PointCloud& cloud_b) {
    const int n = cloud_a.size();
    if (n != cloud_b.size()) throw std::invalid_argument("kabsch: cloud sizes differ");
    if (n < 3) throw std::invalid_argument("kabsch: need at least 3 points");
    const Eigen::Vector3d ca = cloud_a.points.rowwise().mean();
    const Eigen::Vector3d cb = cloud_b.points.rowwise().mean();
    const Eigen::Matrix3Xd ac = cloud_a.points.colwise() - ca;
    const Eigen::Matrix3Xd bc = cloud_b.points.colwise() - cb;
    const Eigen::Matrix3d h = ac * bc.transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0)))
        throw std::invalid_argument("kabsch: degenerate (collinear) geometry");
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant();
    return svd.matrixV() * d * svd.matrixU().transpose();
}

double geodesic_loss(const Eigen::Matrix3d& r_a, const Eigen::Matrix3d& r_b) {
    const double arg = (r_a - r_b).norm() / (2.0 * std::sqrt(2.0));
    return 2.0 * std::asin(std::clamp(arg, 0.0, 1.0));
}

RotationEstimate axis_angle_from_rotation(const Eigen::Matrix3d& r) {
    if (!is_rotation(r, 1e-6)) throw std::invalid_argument("axis_angle: not a rotation matrix");
    RotationEstimate est;
    est.rotation = r;
    const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    est.angle = std::acos(cos_angle);

    const Eigen::Vector3d skew_vec(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (est.angle < 1e-6) {
        est.degenerate = true;
        return est;
    }
    if (est.angle < kPi - 1e-4) {
        est.axis = skew_vec / (2.0 * std::sin(est.angle));
        est.axis.normalize();
        return est;
    }
    // Near pi the skew part vanishes; the axis is the +1 eigenvector of the
    // symmetric part.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es((r + r.transpose()) / 2.0);
    Eigen::Vector3d axis = es.eigenvectors().col(2);  // largest eigenvalue ~ 1
    axis.normalize();
    if (skew_vec.norm() > 1e-12) {
        if (skew_vec.dot(axis) < 0) axis = -axis;
    } else {
        // exactly pi: fix a canonical sign
        for (int i = 0; i < 3; ++i) {
            if (std::abs(axis[i]) > 1e-9) {
                if (axis[i] < 0) axis = -axis;
                break;
            }
        }
    }
    est.axis = axis;
    return est;
}

RateEstimate angular_rate(const std::vector<RotationEstimate>& frames, double frame_interval) {
    if (frame_interval <= 0) throw std::invalid_argument("angular_rate: frame interval must be positive");
    if (frames.size() < 2) throw std::invalid_argument("angular_rate: need at least 2 frames");

    Eigen::Vector3d ref = Eigen::Vector3d::Zero();
    std::vector<double> angles;
    Eigen::Vector3d axis_sum = Eigen::Vector3d::Zero();
    int used = 0;
    for (const auto& f : frames) {
        if (f.degenerate) continue;
        Eigen::Vector3d a = f.axis;
        if (used == 0) {
            ref = a;
        } else if (a.dot(ref) < 0) {
            a = -a;
        }
        axis_sum += a;
        angles.push_back(f.angle);
        ++used;
    }
    if (used == 0) throw std::runtime_error("angular_rate: all frames degenerate");

    std::sort(angles.begin(), angles.end());
    const std::size_t mid = angles.size() / 2;
    const double median = (angles.size() % 2 == 1)
                              ? angles[mid]
                              : 0.5 * (angles[mid - 1] + angles[mid]);
    RateEstimate out;
    out.rate = median / frame_interval;
    out.axis = axis_sum.normalized();
    out.used_frames = used;
    return out;
}

}  // namespace ffdasm

#include "ffdasm/ekf.hpp"

#include <cmath>
#include <stdexcept>

#include "ffdasm/math_util.hpp"

namespace ffdasm {

PlaneFrame build_plane_frame(const Eigen::Vector3d& axis,
                             const std::vector<Eigen::Vector3d>& observations) {
    if (std::abs(axis.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("plane frame axis must be unit length");
    if (observations.size() < 3)
        throw std::invalid_argument("plane frame needs at least 3 observations");

    PlaneFrame frame;
    frame.axis = axis;
    // least-aligned world axis, deterministic tie-break by index
    int best = 0;
    double best_dot = std::abs(axis.x());
    for (int i = 1; i < 3; ++i) {
        const double d = std::abs(axis[i]);
        if (d < best_dot - 1e-15) {
            best_dot = d;
            best = i;
        }
    }
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[best] = 1.0;
    frame.u = (e - e.dot(axis) * axis).normalized();
    frame.v = axis.cross(frame.u);

    // Kasa circle fit in in-plane coordinates.
    const auto n = static_cast<Eigen::Index>(observations.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd rhs(n);
    double h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d& p = observations[static_cast<std::size_t>(i)];
        const double x = frame.u.dot(p);
        const double y = frame.v.dot(p);
        a(i, 0) = 2.0 * x;
        a(i, 1) = 2.0 * y;
        a(i, 2) = 1.0;
        rhs(i) = x * x + y * y;
        h += axis.dot(p);
    }
    h /= static_cast<double>(n);

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(2) < 1e-10 * std::max(1.0, svd.singularValues()(0)))
        throw std::invalid_argument("plane frame fit: collinear observations");
    const Eigen::Vector3d sol = svd.solve(rhs);
    const double cx = sol(0), cy = sol(1);
    const double r2 = sol(2) + cx * cx + cy * cy;

    frame.center = cx * frame.u + cy * frame.v;
    frame.axial_offset = h;
    frame.radius = std::sqrt(std::max(0.0, r2));
    return frame;
}

Eigen::Vector2d project(const Eigen::Vector3d& p, const PlaneFrame& frame) {
    const Eigen::Vector3d d = p - frame.center;
    return {frame.u.dot(d), frame.v.dot(d)};
}

Eigen::Vector3d lift(double x, double y, const PlaneFrame& frame) {
    return frame.center + x * frame.u + y * frame.v + frame.axial_offset * frame.axis;
}

void TargetEkf::initialize(const Eigen::Vector2d& measurement, double circle_radius) {
    if (init_stage_ == 0) {
        first_meas_ = measurement;
        state_.head<2>() = measurement;
        init_stage_ = 1;
        return;
    }
    if (init_stage_ == 1) {
        const Eigen::Vector2d d = measurement - first_meas_;
        state_.head<2>() = measurement;
        state_(2) = (d.norm() > 1e-12) ? std::atan2(d.y(), d.x()) : 0.0;
        state_(3) = circle_radius * spin_rate_;
        covariance_ = params_.initial_covariance;
        init_stage_ = 2;
    }
}

Eigen::Vector4d TargetEkf::motion_model(const Eigen::Vector4d& x, double spin_rate, double dt) {
    Eigen::Vector4d next;
    next(0) = x(0) + x(3) * std::cos(x(2)) * dt;
    next(1) = x(1) + x(3) * std::sin(x(2)) * dt;
    next(2) = wrap_angle(x(2) + spin_rate * dt);
    next(3) = x(3);
    return next;
}

Eigen::Matrix4d TargetEkf::motion_jacobian(const Eigen::Vector4d& x, double dt) {
    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(0, 2) = -x(3) * std::sin(x(2)) * dt;
    f(0, 3) = std::cos(x(2)) * dt;
    f(1, 2) = x(3) * std::cos(x(2)) * dt;
    f(1, 3) = std::sin(x(2)) * dt;
    return f;
}

void TargetEkf::predict() {
    const Eigen::Matrix4d f = motion_jacobian(state_, params_.dt);
    state_ = motion_model(state_, spin_rate_, params_.dt);
    covariance_ = f * covariance_ * f.transpose() + params_.process_noise;
    covariance_ = 0.5 * (covariance_ + covariance_.transpose());
}

void TargetEkf::update(const Eigen::Vector2d& measurement) {
    if (!measurement.allFinite()) throw std::invalid_argument("non-finite measurement");
    Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    const Eigen::Matrix2d s = h * covariance_ * h.transpose() + params_.measurement_noise;
    if (std::abs(s.determinant()) < 1e-300)
        throw std::runtime_error("singular innovation covariance");
    const Eigen::Matrix<double, 4, 2> k = covariance_ * h.transpose() * s.inverse();
    const Eigen::Vector2d innovation = measurement - state_.head<2>();
    state_ += k * innovation;
    state_(2) = wrap_angle(state_(2));
    const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
    covariance_ = ikh * covariance_ * ikh.transpose() +
                  k * params_.measurement_noise * k.transpose();
    covariance_ = 0.5 * (covariance_ + covariance_.transpose());
}

Eigen::Vector2d TargetEkf::predict_ahead() const {
    return motion_model(state_, spin_rate_, params_.dt).head<2>();
}

Eigen::Vector3d predict_target(const TargetEkf& ekf, const PlaneFrame& frame) {
    const Eigen::Vector2d p = ekf.predict_ahead();
    return lift(p.x(), p.y(), frame);
}

}  // namespace ffdasm

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "ffdasm/pointcloud.hpp"
#include "ffdasm/rotation.hpp"

using namespace ffdasm;

namespace {
constexpr double kPi = std::numbers::pi;
const ShapeSpec kBox{ShapeKind::Box, Eigen::Vector3d(1.0, 0.7, 0.4)};
}  // namespace

TEST_CASE("sample_surface: unit sphere gives unit radii with radial normals") {
    const ShapeSpec sphere{ShapeKind::Sphere, Eigen::Vector3d(1.0, 0, 0)};
    const PointCloud c = sample_surface(sphere, 256, 0.0, 4);
    for (int i = 0; i < c.size(); ++i) {
        CHECK(c.points.col(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((c.points.col(i) - c.normals.col(i)).norm() < 1e-9);
    }
}

TEST_CASE("sample_surface: box face areas are uniform within 5 percent") {
    const ShapeSpec box{ShapeKind::Box, Eigen::Vector3d(1.0, 1.0, 1.0)};
    const int n = 100000;
    const PointCloud c = sample_surface_raw(box, n, 0.0, 9);
    int counts[6] = {0, 0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d nrm = c.normals.col(i);
        for (int axis = 0; axis < 3; ++axis) {
            if (nrm[axis] > 0.5) ++counts[2 * axis];
            if (nrm[axis] < -0.5) ++counts[2 * axis + 1];
        }
    }
    for (int f = 0; f < 6; ++f)
        CHECK(std::abs(counts[f] - n / 6.0) / (n / 6.0) < 0.05);
}

TEST_CASE("sample_surface: deterministic under seed, invalid dims rejected") {
    const PointCloud a = sample_surface(kBox, 64, 0.01, 5);
    const PointCloud b = sample_surface(kBox, 64, 0.01, 5);
    CHECK((a.points - b.points).norm() == 0.0);
    CHECK_THROWS_AS(sample_surface({ShapeKind::Box, Eigen::Vector3d(-1, 1, 1)}, 64, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_surface(kBox, 3, 0, 1), std::invalid_argument);
}

TEST_CASE("make_rotation_pair: pointwise relation and round trip") {
    std::mt19937_64 rng(3);
    const PointCloud cloud = sample_surface(kBox, 64, 0.0, 8);
    auto [a, b, r] = make_rotation_pair(cloud, rng);
    CHECK((b.points - r * a.points).norm() < 1e-12);
    CHECK((r.transpose() * b.points - a.points).norm() < 1e-12);
    CHECK((b.normals - r * a.normals).norm() < 1e-12);
}

TEST_CASE("make_rotation_pair: identity rotation leaves the cloud unchanged") {
    std::mt19937_G64:
    std::mt19937_64 rng(3);
    const PointCloud cloud = sample_surface(kBox, 32, 0.0, 8);
    PointCloud b;
    b.points = Eigen::Matrix3d::Identity() * cloud.points;
    CHECK((b.points - cloud.points).norm() == 0.0);
}

TEST_CASE("random_rotation: angle histogram matches the (1-cos)/pi density") {
    std::mt19937_64 rng(12);
    const int n = 10000;
    const int bins = 8;
    std::vector<int> hist(bins, 0);
    for (int i = 0; i < n; ++i) {
        const Eigen::Matrix3d r = random_rotation(rng);
        const double angle = axis_angle_from_rotation(r).angle;
        const int b = std::min(bins - 1, static_cast<int>(angle / kPi * bins));
        ++hist[b];
    }
    for (int b = 0; b < bins; ++b) {
        const double lo = kPi * b / bins, hi = kPi * (b + 1) / bins;
        const double expected = n * ((hi - std::sin(hi)) - (lo - std::sin(lo))) / kPi;
        CHECK(std::abs(hist[b] - expected) < 5 * std::sqrt(expected + 1));
    }
}

TEST_CASE("kabsch: identity on identical clouds, exact on noiseless rotations") {
    const PointCloud cloud = sample_surface(kBox, 128, 0.0, 21);
    const Eigen::Matrix3d id = kabsch_estimate(cloud, cloud);
    CHECK((id - Eigen::Matrix3d::Identity()).norm() < 1e-12);

    const Eigen::Matrix3d r = rodrigues(Eigen::Vector3d(0, 0, 1), kPi / 3);
    PointCloud rotated;
    rotated.points = r * cloud.points;
    rotated.normals = r * cloud.normals;
    const Eigen::Matrix3d est = kabsch_estimate(cloud, rotated);
    CHECK(geodesic_loss(r, est) < 1e-9);
}

TEST_CASE("kabsch: noisy recovery within 0.05 rad in at least 95 percent of trials") {
    std::mt19937_64 rng(31);
    int good = 0;
    const int trials = 100;
    for (int i = 0; i < trials; ++i) {
        const PointCloud cloud = sample_surface(kBox, 128, 0.01, rng());
        auto [a, b, r_true] = make_rotation_pair(cloud, rng, 0.01);
        if (geodesic_loss(r_true, kabsch_estimate(a, b)) < 0.05) ++good;
    }
    CHECK(good >= 95);
}

TEST_CASE("kabsch: rejects size mismatch and collinear geometry") {
    PointCloud line;
    line.points.resize(3, 8);
    line.normals.resize(3, 8);
    for (int i = 0; i < 8; ++i) {
        line.points.col(i) = Eigen::Vector3d(i * 0.1, 0, 0);
        line.normals.col(i) = Eigen::Vector3d::UnitZ();
    }
    CHECK_THROWS_AS(kabsch_estimate(line, line), std::invalid_argument);

    const PointCloud cloud = sample_surface(kBox, 16, 0, 2);
    PointCloud small = cloud;
    small.points = cloud.points.leftCols(8);
    small.normals = cloud.normals.leftCols(8);
    CHECK_THROWS_AS(kabsch_estimate(cloud, small), std::invalid_argument);
}

TEST_CASE("geodesic_loss: zero at equality, exact at quarter and half turns") {
    std::mt19937_64 rng(41);
    const Eigen::Matrix3d r = random_rotation(rng);
    CHECK(geodesic_loss(r, r) == doctest::Approx(0.0));

    const Eigen::Vector3d axis = Eigen::Vector3d(1, 2, -0.5).normalized();
    const Eigen::Matrix3d a = rodrigues(axis, 0.4);
    CHECK(geodesic_loss(a, rodrigues(axis, 0.4 + kPi / 2)) ==
          doctest::Approx(kPi / 2).epsilon(1e-9));
    CHECK(geodesic_loss(a, rodrigues(axis, 0.4 + kPi)) == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(geodesic_loss(a, rodrigues(axis, 0.4 + kPi / 2)) ==
          doctest::Approx(geodesic_loss(rodrigues(axis, 0.4 + kPi / 2), a)));
}

TEST_CASE("geodesic_loss equals the rotation angle of Ra^T Rb") {
    std::mt19937_64 rng(43);
    for (int i = 0; i < 2000; ++i) {
        const Eigen::Matrix3d r1 = random_rotation(rng);
        const Eigen::Matrix3d r2 = random_rotation(rng);
        const double via_loss = geodesic_loss(r1, r2);
        const Eigen::Matrix3d rel = r1.transpose() * r2;
        const double via_trace =
            std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
        CHECK(std::abs(via_loss - via_trace) < 1e-9);
    }
}

TEST_CASE("axis_angle_from_rotation: degenerate identity, analytic quarter turn") {
    const RotationEstimate id = axis_angle_from_rotation(Eigen::Matrix3d::Identity());
    CHECK(id.degenerate);
    CHECK(id.angle == doctest::Approx(0.0));

    const RotationEstimate quarter =
        axis_angle_from_rotation(rodrigues(Eigen::Vector3d(0, 0, 1), kPi / 2));
    CHECK(!quarter.degenerate);
    CHECK(quarter.angle == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK((quarter.axis - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);

    CHECK_THROWS_AS(axis_angle_from_rotation(2.0 * Eigen::Matrix3d::Identity()),
                    std::invalid_argument);
}

TEST_CASE("axis_angle_from_rotation: Rodrigues round trip away from degeneracies") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> angle_dist(0.01, kPi - 0.01);
    std::normal_distribution<double> gauss(0, 1);
    for (int i = 0; i < 500; ++i) {
        Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
        while (axis.norm() < 1e-6) axis = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        axis.normalize();
        const double angle = angle_dist(rng);
        const RotationEstimate est = axis_angle_from_rotation(rodrigues(axis, angle));
        REQUIRE(!est.degenerate);
        CHECK(std::abs(est.angle - angle) < 1e-9);
        CHECK((est.axis - axis).norm() < 1e-9);
        const Eigen::Matrix3d rebuilt = rodrigues(est.axis, est.angle);
        CHECK(geodesic_loss(rebuilt, rodrigues(axis, angle)) < 1e-9);
    }
}

TEST_CASE("axis_angle_from_rotation: near-pi eigen fallback stays consistent") {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> gauss(0, 1);
    for (double angle : {kPi - 1e-5, kPi - 1e-7, kPi}) {
        Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
        axis.normalize();
        const Eigen::Matrix3d r = rodrigues(axis, angle);
        const RotationEstimate est = axis_angle_from_rotation(r);
        CHECK(!est.degenerate);
        CHECK(std::abs(est.angle - angle) < 1e-6);
        // axis defined up to sign at pi
        CHECK(std::min((est.axis - axis).norm(), (est.axis + axis).norm()) < 1e-5);
        CHECK(geodesic_loss(rodrigues(est.axis, est.angle), r) < 1e-6);
    }
}

TEST_CASE("angular_rate: exact on constant spin, sign alignment, degenerate skipping") {
    const Eigen::Vector3d axis = Eigen::Vector3d(0.3, -0.2, 0.9).normalized();
    const double omega = 1.3, dt = 0.5;
    std::vector<RotationEstimate> frames;
    for (int i = 0; i < 6; ++i)
        frames.push_back(axis_angle_from_rotation(rodrigues(axis, omega * dt)));
    const RateEstimate rate = angular_rate(frames, dt);
    CHECK(rate.rate == doctest::Approx(omega).epsilon(1e-12));
    CHECK((rate.axis - axis).norm() < 1e-9);

    // flip half the axes: alignment should recover the consensus
    std::vector<RotationEstimate> flipped = frames;
    for (std::size_t i = 0; i < flipped.size(); i += 2) flipped[i].axis *= -1.0;
    const RateEstimate aligned = angular_rate(flipped, dt);
    CHECK(std::min((aligned.axis - axis).norm(), (aligned.axis + axis).norm()) < 1e-9);
    CHECK(aligned.rate == doctest::Approx(omega).epsilon(1e-12));

    // degenerate frames are skipped
    std::vector<RotationEstimate> with_degenerate = frames;
    RotationEstimate deg;
    deg.degenerate = true;
    with_degenerate.push_back(deg);
    CHECK(angular_rate(with_degenerate, dt).used_frames == 6);

    std::vector<RotationEstimate> all_degenerate(3, deg);
    CHECK_THROWS_AS(angular_rate(all_degenerate, dt), std::runtime_error);
    CHECK_THROWS_AS(angular_rate(frames, 0.0), std::invalid_argument);
}

TEST_CASE("angular_rate: noisy angles stay within 5 percent over 20 frames") {
    std::mt19937_64 rng(59);
    std::normal_distribution<double> noise(0.0, 0.02);
    const Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    const double omega = 0.8, dt = 0.5;
    std::vector<RotationEstimate> frames;
    for (int i = 0; i < 20; ++i)
        frames.push_back(
            axis_angle_from_rotation(rodrigues(axis, omega * dt + noise(rng))));
    CHECK(angular_rate(frames, dt).rate == doctest::Approx(omega).epsilon(0.05));
}

TEST_CASE("pointcloud file io: text round trip with comments") {
    const PointCloud cloud = sample_surface(kBox, 32, 0.01, 61);
    save_pointcloud(cloud, "cloud_test.txt");
    const PointCloud back = load_pointcloud("cloud_test.txt");
    REQUIRE(back.size() == cloud.size());
    CHECK((back.points - cloud.points).norm() < 1e-14);
    CHECK((back.normals - cloud.normals).norm() < 1e-14);
    std::remove("cloud_test.txt");
}

#include "ffdasm/pointcloud.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ffdasm {

namespace {

constexpr double kPi = std::numbers::pi;

void sample_box(const Eigen::Vector3d& dims, int n, std::mt19937_64& rng, PointCloud& out) {
    const Eigen::Vector3d half = dims / 2;
    // face areas: +-x, +-y, +-z
    const double ax = dims.y() * dims.z();
    const double ay = dims.x() * dims.z();
    const double az = dims.x() * dims.y();
    std::discrete_distribution<int> face({ax, ax, ay, ay, az, az});
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const int f = face(rng);
        const int axis = f / 2;
        const double sign = (f % 2 == 0) ? 1.0 : -1.0;
        Eigen::Vector3d p(uni(rng) * half.x(), uni(rng) * half.y(), uni(rng) * half.z());
        p[axis] = sign * half[axis];
        Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
        nrm[axis] = sign;
        out.points.col(i) = p;
        out.normals.col(i) = nrm;
    }
}

void sample_cylinder(double radius, double height, int n, std::mt19937_64& rng, PointCloud& out) {
    const double side_area = 2 * kPi * radius * height;
    const double cap_area = kPi * radius * radius;
    std::discrete_distribution<int> part({side_area, cap_area, cap_area});
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const int which = part(rng);
        const double phi = 2 * kPi * uni(rng);
        if (which == 0) {
            const double z = (uni(rng) - 0.5) * height;
            out.points.col(i) = Eigen::Vector3d(radius * std::cos(phi), radius * std::sin(phi), z);
            out.normals.col(i) = Eigen::Vector3d(std::cos(phi), std::sin(phi), 0);
        } else {
            const double r = radius * std::sqrt(uni(rng));
            const double sign = (which == 1) ? 1.0 : -1.0;
            out.points.col(i) =
                Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), sign * height / 2);
            out.normals.col(i) = Eigen::Vector3d(0, 0, sign);
        }
    }
}

void sample_sphere(double radius, int n, std::mt19937_64& rng, PointCloud& out) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
        while (d.norm() < 1e-12) d = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        d.normalize();
        out.points.col(i) = radius * d;
        out.normals.col(i) = d;
    }
}

PointCloud sample_impl(const ShapeSpec& shape, int n, double noise_sigma, std::uint64_t seed,
                       bool normalize) {
    shape.validate();
    if (n < 4) throw std::invalid_argument("need at least 4 surface samples");
    std::mt19937_64 rng(seed);
    PointCloud cloud;
    cloud.points.resize(3, n);
    cloud.normals.resize(3, n);
    switch (shape.kind) {
        case ShapeKind::Box: sample_box(shape.dims, n, rng, cloud); break;
        case ShapeKind::Cylinder: sample_cylinder(shape.dims.x(), shape.dims.y(), n, rng, cloud); break;
        case ShapeKind::Sphere: sample_sphere(shape.dims.x(), n, rng, cloud); break;
    }
    if (noise_sigma > 0) {
        std::normal_distribution<double> gauss(0.0, noise_sigma);
        for (int i = 0; i < n; ++i)
            cloud.points.col(i) += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }
    if (normalize) {
        const double rms = std::sqrt(cloud.points.colwise().squaredNorm().mean());
        if (rms > 0) cloud.points /= rms;
    }
    return cloud;
}

}  // namespace

void ShapeSpec::validate() const {
    switch (kind) {
        case ShapeKind::Box:
            if (dims.minCoeff() <= 0) throw std::invalid_argument("box sides must be positive");
            break;
        case ShapeKind::Cylinder:
            if (dims.x() <= 0 || dims.y() <= 0)
                throw std::invalid_argument("cylinder radius/height must be positive");
            break;
        case ShapeKind::Sphere:
            if (dims.x() <= 0) throw std::invalid_argument("sphere radius must be positive");
            break;
    }
}

PointCloud sample_surface(const ShapeSpec& shape, int n, double noise_sigma, std::uint64_t seed) {
    return sample_impl(shape, n, noise_sigma, seed, /*normalize=*/true);
}

PointCloud sample_surface_raw(const ShapeSpec& shape, int n, double noise_sigma,
                              std::uint64_t seed) {
    return sample_impl(shape, n, noise_sigma, seed, /*normalize=*/false);
}

void save_pointcloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.precision(17);
    os << "# x y z nx ny nz\n";
    for (int i = 0; i < cloud.size(); ++i) {
        const auto p = cloud.points.col(i);
        const auto n = cloud.normals.col(i);
        os << p.x() << ' ' << p.y() << ' ' << p.z() << ' '
           << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
    }
}

PointCloud load_pointcloud(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<Eigen::Vector3d> pts, nrms;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        Eigen::Vector3d p, n;
        if (ls >> p.x() >> p.y() >> p.z() >> n.x() >> n.y() >> n.z()) {
            pts.push_back(p);
            nrms.push_back(n);
        }
    }
    PointCloud cloud;
    cloud.points.resize(3, static_cast<Eigen::Index>(pts.size()));
    cloud.normals.resize(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        cloud.points.col(static_cast<Eigen::Index>(i)) = pts[i];
        cloud.normals.col(static_cast<Eigen::Index>(i)) = nrms[i];
    }
    return cloud;
}

}  // namespace ffdasm

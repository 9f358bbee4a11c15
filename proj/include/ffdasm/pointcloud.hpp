#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace ffdasm {

struct PointCloud {
    Eigen::Matrix3Xd points;
    Eigen::Matrix3Xd normals;
    int size() const { return static_cast<int>(points.cols()); }
};

enum class ShapeKind { Box, Cylinder, Sphere };

struct ShapeSpec {
    ShapeKind kind = ShapeKind::Box;
    // Box: full side lengths (x, y, z). Cylinder: (radius, height, unused).
    // Sphere: (radius, unused, unused).
    Eigen::Vector3d dims = Eigen::Vector3d(1.0, 0.7, 0.4);

    void validate() const;
};

/// Area-weighted uniform surface samples with outward normals, Gaussian
/// position noise, then scale normalization (RMS point norm = 1).
PointCloud sample_surface(const ShapeSpec& shape, int n, double noise_sigma, std::uint64_t seed);

/// Same sampling without the scale normalization (world-size clouds for the
/// tracking scenario).
PointCloud sample_surface_raw(const ShapeSpec& shape, int n, double noise_sigma,
                              std::uint64_t seed);

/// Text format: one `x y z nx ny nz` line per point, '#' comments.
void save_pointcloud(const PointCloud& cloud, const std::string& path);
PointCloud load_pointcloud(const std::string& path);

}  // namespace ffdasm

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cloaksynth/specfun.hpp"

namespace cloak {

// Rotation taking world directions into a working frame (cap axis -> +z).
struct Frame {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();

    Vec3 to_local(const Vec3& world) const { return R * world; }
    Vec3 to_world(const Vec3& local) const { return R.transpose() * local; }
    // Rotation with R * axis = +z.
    static Frame aligned_to(const Vec3& axis);
};

enum class CapSense { Interior, Exterior };

struct CapRegion {
    Vec3 axis{0.0, 0.0, 1.0};
    double aperture = 0.0;  // radians
    CapSense sense = CapSense::Interior;

    CapRegion() = default;
    CapRegion(const Vec3& axis, double aperture, CapSense sense = CapSense::Interior);

    // Equivalent interior cap: exterior sense flips to (-axis, pi - aperture).
    CapRegion canonical() const;
    Frame frame() const { return Frame::aligned_to(canonical().axis); }
};

struct GridNode {
    double theta;
    double phi;
    double weight;  // steradians
};

// Gauss-Legendre in cos(theta) times uniform azimuth. Node order is ring-major.
struct SurfaceGrid {
    int L_max = 0;
    int n_theta = 0;
    int n_phi = 0;
    std::vector<double> theta;     // ascending colatitudes
    std::vector<double> cos_theta;
    std::vector<double> ring_weight;  // Gauss-Legendre weight per ring
    std::vector<double> phi;
    std::vector<GridNode> nodes;

    std::size_t size() const { return nodes.size(); }
    std::size_t node(int ring, int j) const { return static_cast<std::size_t>(ring) * n_phi + j; }
    Vec3 direction(std::size_t i) const;
    // Largest degree the grid analyses without aliasing.
    int exact_degree() const { return std::min(n_theta - 1, (n_phi - 1) / 2); }
};

SurfaceGrid build_grid(int L_max);
SurfaceGrid build_grid(int n_theta, int n_phi, int L_max);

bool in_cap(const CapRegion& region, const Vec3& point);

// f_lm = sum_nodes w * f * conj(Y_lm), l <= L.
Eigen::VectorXcd analyze(const SurfaceGrid& grid, const Eigen::VectorXcd& samples, int L);
// Inverse transform at the grid nodes.
Eigen::VectorXcd synthesize(const SurfaceGrid& grid, const Eigen::VectorXcd& coeffs, int L);
// Quadrature of samples over the sphere.
cd integrate(const SurfaceGrid& grid, const Eigen::VectorXcd& samples);

}  // namespace cloak

#include "cloaksynth/sphere_grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cloaksynth/quadrature.hpp"

namespace cloak {

Frame Frame::aligned_to(const Vec3& axis) {
    Frame f;
    const Vec3 a = axis.normalized();
    const Vec3 z(0.0, 0.0, 1.0);
    const double c = a.dot(z);
    if (c > 1.0 - 1e-15) return f;
    if (c < -1.0 + 1e-15) {
        f.R = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
        return f;
    }
    const Vec3 n = a.cross(z).normalized();
    f.R = Eigen::AngleAxisd(std::acos(c), n).toRotationMatrix();
    return f;
}

CapRegion::CapRegion(const Vec3& axis_, double aperture_, CapSense sense_)
    : axis(axis_), aperture(aperture_), sense(sense_) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("cap axis must be nonzero");
    if (std::abs(n - 1.0) > 1e-14) axis /= n;
    if (!(aperture > 0.0 && aperture < std::numbers::pi))
        throw std::invalid_argument("cap aperture must lie in (0, pi)");
}

CapRegion CapRegion::canonical() const {
    if (sense == CapSense::Interior) return *this;
    return CapRegion(-axis, std::numbers::pi - aperture, CapSense::Interior);
}

Vec3 SurfaceGrid::direction(std::size_t i) const {
    const auto& n = nodes[i];
    const double s = std::sin(n.theta);
    return {s * std::cos(n.phi), s * std::sin(n.phi), std::cos(n.theta)};
}

SurfaceGrid build_grid(int n_theta, int n_phi, int L_max) {
    if (n_theta < 1 || n_phi < 1) throw std::invalid_argument("grid needs at least one node");
    SurfaceGrid g;
    g.L_max = L_max;
    g.n_theta = n_theta;
    g.n_phi = n_phi;
    const auto gl = gauss_legendre(n_theta);
    // Ascending colatitude means descending cos(theta).
    for (int i = n_theta - 1; i >= 0; --i) {
        g.cos_theta.push_back(gl.nodes[i]);
        g.theta.push_back(std::acos(gl.nodes[i]));
        g.ring_weight.push_back(gl.weights[i]);
    }
    const double dphi = 2.0 * std::numbers::pi / n_phi;
    for (int j = 0; j < n_phi; ++j) g.phi.push_back(j * dphi);
    g.nodes.reserve(static_cast<std::size_t>(n_theta) * n_phi);
    for (int i = 0; i < n_theta; ++i)
        for (int j = 0; j < n_phi; ++j) g.nodes.push_back({g.theta[i], g.phi[j], g.ring_weight[i] * dphi});
    return g;
}

SurfaceGrid build_grid(int L_max) {
    if (L_max < 0) throw std::invalid_argument("L_max must be >= 0");
    const int oversample = L_max + 1;
    const int nt = L_max + 1 + oversample;
    return build_grid(nt, 2 * nt, L_max);
}

bool in_cap(const CapRegion& region, const Vec3& point) {
    const double c = region.axis.dot(point);
    const double edge = std::cos(region.aperture);
    return region.sense == CapSense::Interior ? c > edge : c < edge;
}

Eigen::VectorXcd analyze(const SurfaceGrid& grid, const Eigen::VectorXcd& samples, int L) {
    if (samples.size() != static_cast<Eigen::Index>(grid.size()))
        throw std::invalid_argument("analyze: sample count does not match grid");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(harmonic_count(L));
    const double dphi = 2.0 * std::numbers::pi / grid.n_phi;
    std::vector<cd> ring(2 * L + 1);
    for (int i = 0; i < grid.n_theta; ++i) {
        for (int m = -L; m <= L; ++m) {
            cd s = 0.0;
            for (int j = 0; j < grid.n_phi; ++j)
                s += samples[grid.node(i, j)] * std::exp(cd(0.0, -m * grid.phi[j]));
            ring[m + L] = s * dphi * grid.ring_weight[i];
        }
        const auto t = normalized_legendre_table(L, grid.cos_theta[i]);
        for (int l = 0; l <= L; ++l)
            for (int m = -l; m <= l; ++m) {
                const int am = std::abs(m);
                const double sign = (m < 0 && (am % 2)) ? -1.0 : 1.0;
                out[flat_index(l, m)] += sign * t[tri_index(l, am)] * ring[m + L];
            }
    }
    return out;
}

Eigen::VectorXcd synthesize(const SurfaceGrid& grid, const Eigen::VectorXcd& coeffs, int L) {
    if (coeffs.size() < harmonic_count(L))
        throw std::invalid_argument("synthesize: coefficient vector too short");
    Eigen::VectorXcd out(grid.size());
    std::vector<cd> ring(2 * L + 1);
    for (int i = 0; i < grid.n_theta; ++i) {
        const auto t = normalized_legendre_table(L, grid.cos_theta[i]);
        for (int m = -L; m <= L; ++m) {
            const int am = std::abs(m);
            const double sign = (m < 0 && (am % 2)) ? -1.0 : 1.0;
            cd s = 0.0;
            for (int l = am; l <= L; ++l) s += t[tri_index(l, am)] * coeffs[flat_index(l, m)];
            ring[m + L] = sign * s;
        }
        for (int j = 0; j < grid.n_phi; ++j) {
            cd s = 0.0;
            for (int m = -L; m <= L; ++m) s += ring[m + L] * std::exp(cd(0.0, m * grid.phi[j]));
            out[grid.node(i, j)] = s;
        }
    }
    return out;
}

cd integrate(const SurfaceGrid& grid, const Eigen::VectorXcd& samples) {
    cd s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.nodes[i].weight * samples[i];
    return s;
}

}  // namespace cloak

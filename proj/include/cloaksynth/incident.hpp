#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cloaksynth/sphere_grid.hpp"
#include "cloaksynth/specfun.hpp"

namespace cloak {

enum class BcVariant {
    MixedImpedance,  // u = w on F, u_N + h u = 0 on F'
    MixedDirichlet   // u = w on F, u = 0 on F'
};

// Impedance h, either one value or one value per grid node.
struct Impedance {
    cd value = 0.0;
    std::vector<cd> per_node;

    Impedance() = default;
    Impedance(cd v) : value(v) {}       // NOLINT(google-explicit-constructor)
    Impedance(double v) : value(v) {}   // NOLINT(google-explicit-constructor)
    static Impedance nodal(std::vector<cd> values);

    bool is_nodal() const { return !per_node.empty(); }
    cd at(std::size_t node) const { return per_node.empty() ? value : per_node[node]; }
};

struct WaveContext {
    double k = 1.0;
    double a = 1.0;
    Vec3 alpha{0.0, 0.0, 1.0};
    Impedance h;
    BcVariant bc_variant = BcVariant::MixedImpedance;
    // Amplitude switch for u0; false gives the problem driven by w alone.
    bool incident = true;

    // Throws std::invalid_argument on k <= 0, a <= 0, |alpha| != 1 or Im h < 0.
    void validate() const;
    double ka() const { return k * a; }
};

struct TraceSamples {
    Eigen::VectorXcd values;
    Eigen::VectorXcd normal_derivatives;
};

// u0 = exp(i k a alpha.n) and its outward normal derivative at every node.
TraceSamples plane_wave_trace(const WaveContext& ctx, const SurfaceGrid& grid);

// Coefficients of u0 on r = a: 4 pi i^l j_l(ka) conj(Y_lm(alpha)), l <= L_max.
Eigen::VectorXcd plane_wave_coefficients(const WaveContext& ctx, int L_max);
Eigen::VectorXcd plane_wave_coefficients(double k, double a, const Vec3& alpha, int L_max);

// 4 pi i^l conj(Y_lm(alpha)), the angular factor shared by incident and Mie expansions.
Eigen::VectorXcd plane_wave_angular(const Vec3& alpha, int L_max);

}  // namespace cloak

#include "cloaksynth/incident.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cloak {

Impedance Impedance::nodal(std::vector<cd> values) {
    Impedance h;
    h.per_node = std::move(values);
    if (!h.per_node.empty()) h.value = h.per_node.front();
    return h;
}

void WaveContext::validate() const {
    if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("wavenumber k must be positive");
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("radius a must be positive");
    if (std::abs(alpha.norm() - 1.0) > 1e-14) throw std::invalid_argument("alpha must be a unit vector");
    auto check = [](cd v) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw std::invalid_argument("impedance must be finite");
        if (v.imag() < 0.0) throw std::invalid_argument("impedance needs Im h >= 0");
    };
    check(h.value);
    for (const auto& v : h.per_node) check(v);
}

TraceSamples plane_wave_trace(const WaveContext& ctx, const SurfaceGrid& grid) {
    TraceSamples t;
    t.values.resize(grid.size());
    t.normal_derivatives.resize(grid.size());
    const double amp = ctx.incident ? 1.0 : 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double c = ctx.alpha.dot(grid.direction(i));
        const cd v = amp * std::exp(cd(0.0, ctx.k * ctx.a * c));
        t.values[i] = v;
        t.normal_derivatives[i] = cd(0.0, ctx.k * c) * v;
    }
    return t;
}

Eigen::VectorXcd plane_wave_angular(const Vec3& alpha, int L_max) {
    double th, ph;
    to_polar(alpha, th, ph);
    Eigen::VectorXcd y = spherical_harmonics_all(L_max, th, ph).conjugate();
    cd il = 1.0;
    for (int l = 0; l <= L_max; ++l) {
        for (int m = -l; m <= l; ++m) y[flat_index(l, m)] *= 4.0 * std::numbers::pi * il;
        il *= cd(0.0, 1.0);
    }
    return y;
}

Eigen::VectorXcd plane_wave_coefficients(double k, double a, const Vec3& alpha, int L_max) {
    Eigen::VectorXcd c = plane_wave_angular(alpha, L_max);
    const auto j = spherical_bessel_j_array(L_max, k * a);
    for (int l = 0; l <= L_max; ++l)
        for (int m = -l; m <= l; ++m) c[flat_index(l, m)] *= j[l];
    return c;
}

Eigen::VectorXcd plane_wave_coefficients(const WaveContext& ctx, int L_max) {
    Eigen::VectorXcd c = plane_wave_coefficients(ctx.k, ctx.a, ctx.alpha, L_max);
    if (!ctx.incident) c.setZero();
    return c;
}

}  // namespace cloak

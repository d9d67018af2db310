#include "cloaksynth/mie_oracle.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cloaksynth/incident.hpp"

namespace cloak {

namespace {

constexpr int kMaxDegree = 400;

cd reflection(MieKind kind, double k, double a, cd h, int l) {
    const double x = k * a;
    const auto j = spherical_bessel_j_array(l + 1, x);
    const auto hh = spherical_hankel_h1_array(l + 1, x);
    if (kind == MieKind::Soft) return -j[l] / hh[l];
    const double jp = l == 0 ? -j[1] : (l * j[l - 1] - (l + 1.0) * j[l + 1]) / (2.0 * l + 1.0);
    const cd hp = l == 0 ? -hh[1] : hh[l - 1] - (l + 1.0) / x * hh[l];
    return -(k * jp + h * j[l]) / (k * hp + h * hh[l]);
}

MieSolution build(MieKind kind, double k, double a, cd h) {
    if (!(k > 0.0) || !(a > 0.0)) throw std::invalid_argument("Mie oracle needs k > 0 and a > 0");
    MieSolution s;
    s.kind = kind;
    s.k = k;
    s.a = a;
    s.h = h;
    const int floor_l = static_cast<int>(std::ceil(k * a)) + 2;
    for (int l = 0; l <= kMaxDegree; ++l) {
        const cd r = reflection(kind, k, a, h, l);
        if (!std::isfinite(std::abs(r))) break;
        s.R.push_back(r);
        if (l > floor_l && std::abs(r) < 1e-16) break;
    }
    return s;
}

}  // namespace

MieSolution MieSolution::soft(double k, double a) { return build(MieKind::Soft, k, a, 0.0); }

MieSolution MieSolution::impedance(double k, double a, cd h) {
    if (h.imag() < 0.0) throw std::invalid_argument("impedance needs Im h >= 0");
    return build(MieKind::Impedance, k, a, h);
}

cd MieSolution::ratio(int l) const {
    if (l < static_cast<int>(R.size())) return R[l];
    return 0.0;
}

RadiatingField mie_coefficients(const MieSolution& sol, const Vec3& alpha, int L_max) {
    RadiatingField f;
    f.k = sol.k;
    f.a = sol.a;
    f.L_max = L_max;
    f.c = plane_wave_angular(alpha.normalized(), L_max);
    for (int l = 0; l <= L_max; ++l)
        for (int m = -l; m <= l; ++m) f.c[flat_index(l, m)] *= sol.ratio(l);
    return f;
}

double mie_sigma(const MieSolution& sol, double k) {
    double s = 0.0;
    for (std::size_t l = 0; l < sol.R.size(); ++l) s += (2.0 * l + 1.0) * std::norm(sol.R[l]);
    return 4.0 * std::numbers::pi / (k * k) * s;
}

double mie_sigma(const MieSolution& sol) { return mie_sigma(sol, sol.k); }

}  // namespace cloak

#pragma once

#include <vector>

#include "cloaksynth/solver.hpp"
#include "cloaksynth/specfun.hpp"

namespace cloak {

enum class MieKind { Soft, Impedance };

// Closed-form sphere scattering: c_lm = R_l * 4 pi i^l conj(Y_lm(alpha)).
struct MieSolution {
    MieKind kind = MieKind::Soft;
    cd h = 0.0;
    double k = 1.0;
    double a = 1.0;
    std::vector<cd> R;  // reflection ratio per degree, until |R_l| < 1e-16

    double ka() const { return k * a; }
    static MieSolution soft(double k, double a);
    static MieSolution impedance(double k, double a, cd h);
    cd ratio(int l) const;  // R_l, zero past the stored range
};

RadiatingField mie_coefficients(const MieSolution& sol, const Vec3& alpha, int L_max);
double mie_sigma(const MieSolution& sol, double k);
double mie_sigma(const MieSolution& sol);

}  // namespace cloak

#include "cloaksynth/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cloak {

namespace {

void check_order(int l, double x) {
    if (l < 0) throw std::domain_error("negative degree l = " + std::to_string(l));
    if (!std::isfinite(x)) throw std::domain_error("non-finite argument");
}

void check_positive(int l, double x) {
    check_order(l, x);
    if (x <= 0.0) throw std::domain_error("argument must be positive, got " + std::to_string(x));
}

}  // namespace

HarmonicIndex::HarmonicIndex(int l_, int m_) : l(l_), m(m_) {
    if (l < 0 || m < -l || m > l)
        throw std::domain_error("invalid harmonic index (" + std::to_string(l) + "," +
                                std::to_string(m) + ")");
}

HarmonicIndex HarmonicIndex::from_flat(int idx) {
    if (idx < 0) throw std::domain_error("negative flat index");
    int l = static_cast<int>(std::sqrt(static_cast<double>(idx)));
    while (l * l > idx) --l;
    while ((l + 1) * (l + 1) <= idx) ++l;
    return HarmonicIndex(l, idx - l * l - l);
}

std::vector<double> spherical_bessel_j_array(int L, double x) {
    check_order(L, x);
    if (x < 0.0) throw std::domain_error("argument must be non-negative");
    std::vector<double> j(L + 1, 0.0);
    if (x == 0.0) {
        j[0] = 1.0;
        return j;
    }
    // Downward recurrence on the ratios r_l = j_l / j_{l-1}, anchored on j0 or j1.
    const double top = std::max({static_cast<double>(L), x, 1.0});
    const int start = static_cast<int>(std::ceil(top + std::sqrt(60.0 * top))) + 20;
    std::vector<double> r(std::max(start, L) + 2, 0.0);
    double next = 0.0;
    for (int l = start; l >= 1; --l) {
        next = 1.0 / ((2.0 * l + 1.0) / x - next);
        if (l <= L + 1) r[l] = next;
    }
    const double j0 = std::sin(x) / x;
    const double j1 = x < 0.5 ? x * (1.0 / 3.0 - x * x * (1.0 / 30.0 - x * x / 840.0))
                              : std::sin(x) / (x * x) - std::cos(x) / x;
    if (L == 0) {
        j[0] = j0;
        return j;
    }
    if (std::abs(j0) >= std::abs(j1)) {
        j[0] = j0;
        for (int l = 1; l <= L; ++l) j[l] = j[l - 1] * r[l];
    } else {
        j[0] = j0;
        j[1] = j1;
        for (int l = 2; l <= L; ++l) j[l] = j[l - 1] * r[l];
    }
    return j;
}

double spherical_bessel_j(int l, double x) {
    check_order(l, x);
    if (x < 0.0) throw std::domain_error("argument must be non-negative");
    return spherical_bessel_j_array(l, x)[l];
}

std::vector<double> spherical_bessel_y_array(int L, double x) {
    check_positive(L, x);
    std::vector<double> y(L + 1);
    y[0] = -std::cos(x) / x;
    if (L >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
    for (int l = 1; l < L; ++l) y[l + 1] = (2.0 * l + 1.0) / x * y[l] - y[l - 1];
    return y;
}

double spherical_bessel_y(int l, double x) {
    check_positive(l, x);
    return spherical_bessel_y_array(l, x)[l];
}

std::vector<cd> spherical_hankel_h1_array(int L, double x) {
    check_positive(L, x);
    const auto j = spherical_bessel_j_array(L, x);
    const auto y = spherical_bessel_y_array(L, x);
    std::vector<cd> h(L + 1);
    for (int l = 0; l <= L; ++l) h[l] = cd(j[l], y[l]);
    return h;
}

cd spherical_hankel_h1(int l, double x) {
    check_positive(l, x);
    return spherical_hankel_h1_array(l, x)[l];
}

double spherical_bessel_j_prime(int l, double x) {
    check_order(l, x);
    if (x < 0.0) throw std::domain_error("argument must be non-negative");
    if (x == 0.0) return l == 1 ? 1.0 / 3.0 : 0.0;
    const auto j = spherical_bessel_j_array(l + 1, x);
    if (l == 0) return -j[1];
    // Average of the two standard forms reduces cancellation at small x.
    const double down = j[l - 1] - (l + 1.0) / x * j[l];
    const double up = l / x * j[l] - j[l + 1];
    return (l * down + (l + 1.0) * up) / (2.0 * l + 1.0);
}

cd spherical_hankel_h1_prime(int l, double x) {
    check_positive(l, x);
    const auto h = spherical_hankel_h1_array(l + 1, x);
    if (l == 0) return -h[1];
    return h[l - 1] - (l + 1.0) / x * h[l];
}

std::vector<cd> hankel_log_derivative(int L, double x) {
    check_positive(L, x);
    std::vector<cd> out(L + 1);
    const cd e = std::exp(cd(0.0, x));
    const cd h0 = cd(0.0, -1.0) * e / x;
    const cd h1 = -e * (1.0 / x + cd(0.0, 1.0) / (x * x));
    cd q = h1 / h0;  // h_{l+1}/h_l
    out[0] = -q;
    for (int l = 1; l <= L; ++l) {
        out[l] = 1.0 / q - (l + 1.0) / x;
        q = (2.0 * l + 1.0) / x - 1.0 / q;
    }
    return out;
}

std::vector<double> normalized_legendre(int L, int m, double x) {
    if (m < 0) throw std::domain_error("normalized_legendre expects m >= 0");
    std::vector<double> p(std::max(L, 0) + 1, 0.0);
    if (m > L) return p;
    const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double pmm = 0.5 / std::sqrt(std::numbers::pi);
    for (int i = 1; i <= m; ++i) pmm *= -std::sqrt((2.0 * i + 1.0) / (2.0 * i)) * s;
    p[m] = pmm;
    if (m + 1 <= L) p[m + 1] = std::sqrt(2.0 * m + 3.0) * x * pmm;
    for (int l = m + 2; l <= L; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
        const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - m * m) /
                                   (4.0 * (l - 1) * (l - 1) - 1.0));
        p[l] = a * (x * p[l - 1] - b * p[l - 2]);
    }
    return p;
}

std::vector<double> normalized_legendre_table(int L, double x) {
    std::vector<double> t((L + 1) * (L + 2) / 2, 0.0);
    const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double pmm = 0.5 / std::sqrt(std::numbers::pi);
    for (int m = 0; m <= L; ++m) {
        if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
        t[tri_index(m, m)] = pmm;
        if (m + 1 <= L) t[tri_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
        for (int l = m + 2; l <= L; ++l) {
            const double a =
                std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
            const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - m * m) /
                                       (4.0 * (l - 1) * (l - 1) - 1.0));
            t[tri_index(l, m)] = a * (x * t[tri_index(l - 1, m)] - b * t[tri_index(l - 2, m)]);
        }
    }
    return t;
}

cd spherical_harmonic(const HarmonicIndex& idx, double theta, double phi) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw std::domain_error("theta outside [0, pi]");
    const int am = std::abs(idx.m);
    const double p = normalized_legendre(idx.l, am, std::cos(theta))[idx.l];
    const double sign = (idx.m < 0 && (am % 2)) ? -1.0 : 1.0;
    return sign * p * std::exp(cd(0.0, idx.m * phi));
}

Eigen::VectorXcd spherical_harmonics_all(int L, double theta, double phi) {
    Eigen::VectorXcd y(harmonic_count(L));
    const auto t = normalized_legendre_table(L, std::cos(theta));
    for (int m = 0; m <= L; ++m) {
        const cd e = std::exp(cd(0.0, m * phi));
        const double sign = (m % 2) ? -1.0 : 1.0;
        for (int l = m; l <= L; ++l) {
            const cd v = t[tri_index(l, m)] * e;
            y[flat_index(l, m)] = v;
            if (m > 0) y[flat_index(l, -m)] = sign * std::conj(v);
        }
    }
    return y;
}

void to_polar(const Vec3& v, double& theta, double& phi) {
    const double r = v.norm();
    theta = std::acos(std::clamp(v.z() / r, -1.0, 1.0));
    phi = std::atan2(v.y(), v.x());
}

double legendre_p(int l, double x) {
    if (l < 0) throw std::domain_error("negative degree");
    double p0 = 1.0, p1 = x;
    if (l == 0) return p0;
    for (int n = 1; n < l; ++n) {
        const double p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

}  // namespace cloak

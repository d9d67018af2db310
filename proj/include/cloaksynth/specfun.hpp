#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace cloak {

using cd = std::complex<double>;
using Vec3 = Eigen::Vector3d;

// Degree/order pair of a spherical harmonic.
struct HarmonicIndex {
    int l = 0;
    int m = 0;

    HarmonicIndex(int l_, int m_);
    int flat() const { return l * l + l + m; }
    static HarmonicIndex from_flat(int idx);
};

inline int flat_index(int l, int m) { return l * l + l + m; }
inline int harmonic_count(int L) { return (L + 1) * (L + 1); }

double spherical_bessel_j(int l, double x);
double spherical_bessel_y(int l, double x);
cd spherical_hankel_h1(int l, double x);
double spherical_bessel_j_prime(int l, double x);
cd spherical_hankel_h1_prime(int l, double x);

// j_0..j_L at x.
std::vector<double> spherical_bessel_j_array(int L, double x);
// y_0..y_L at x (upward recurrence; may overflow to -inf for L far beyond x).
std::vector<double> spherical_bessel_y_array(int L, double x);
std::vector<cd> spherical_hankel_h1_array(int L, double x);

// h_l'(x)/h_l(x) for l = 0..L. Stays finite where h_l itself overflows.
std::vector<cd> hankel_log_derivative(int L, double x);

// Normalized associated Legendre values with Condon-Shortley phase:
// Y_lm(theta, phi) = legendre(l, m, cos theta) * exp(i m phi), m >= 0.
// Returns entries for l = 0..L (zero for l < m).
std::vector<double> normalized_legendre(int L, int m, double x);

// Same for every order 0..L; entry (l, m) lives at l(l+1)/2 + m.
std::vector<double> normalized_legendre_table(int L, double x);
inline int tri_index(int l, int m) { return l * (l + 1) / 2 + m; }

cd spherical_harmonic(const HarmonicIndex& idx, double theta, double phi);

// All Y_lm for l <= L at one direction, flat-indexed.
Eigen::VectorXcd spherical_harmonics_all(int L, double theta, double phi);

// Polar angles of a (not necessarily unit) vector.
void to_polar(const Vec3& v, double& theta, double& phi);

// Unnormalized Legendre polynomial P_l(x).
double legendre_p(int l, double x);

}  // namespace cloak

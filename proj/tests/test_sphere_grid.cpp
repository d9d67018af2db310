#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cloaksynth/sphere_grid.hpp"

using namespace cloak;

namespace {

const double kPi = std::numbers::pi;

Eigen::VectorXcd sample(const SurfaceGrid& g, int l, int m) {
    Eigen::VectorXcd s(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        s[i] = spherical_harmonic({l, m}, g.nodes[i].theta, g.nodes[i].phi);
    return s;
}

Eigen::VectorXcd random_coeffs(int L, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n;
    Eigen::VectorXcd c(harmonic_count(L));
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = cd(n(gen), n(gen));
    return c;
}

}  // namespace

TEST_CASE("grid layout") {
    const auto g = build_grid(20);
    CHECK(g.n_theta == 42);
    CHECK(g.n_phi == 84);
    CHECK(g.size() == 42u * 84u);
    CHECK(g.exact_degree() >= 20);
    double s = 0.0;
    for (const auto& n : g.nodes) s += n.weight;
    CHECK(std::abs(s - 4 * kPi) <= 1e-12 * 4 * kPi);
    for (int i = 1; i < g.n_theta; ++i) CHECK(g.theta[i] > g.theta[i - 1]);
}

TEST_CASE("quadrature examples") {
    const auto g = build_grid(20);
    CHECK(std::abs(integrate(g, Eigen::VectorXcd::Ones(g.size())) - cd(4 * kPi)) <= 1e-11);
    CHECK(std::abs(integrate(g, sample(g, 5, 3).cwiseAbs2().cast<cd>()) - 1.0) <= 1e-12);
    CHECK(std::abs(integrate(g, sample(g, 2, 0))) <= 1e-12);
}

TEST_CASE("orthonormality up to the grid degree") {
    const int L = 20;
    const auto g = build_grid(L);
    Eigen::MatrixXcd Y(g.size(), harmonic_count(L));
    for (std::size_t i = 0; i < g.size(); ++i)
        Y.row(i) = spherical_harmonics_all(L, g.nodes[i].theta, g.nodes[i].phi).transpose() *
                   std::sqrt(g.nodes[i].weight);
    const Eigen::MatrixXcd G = Y.adjoint() * Y;
    const double off = (G - Eigen::MatrixXcd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
    CHECK(off <= 1e-12);
}

TEST_CASE("analysis examples") {
    const auto g = build_grid(12);
    auto c = analyze(g, sample(g, 3, -2), 12);
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(c.size());
    e[flat_index(3, -2)] = 1.0;
    CHECK((c - e).cwiseAbs().maxCoeff() <= 1e-12);

    const cd k(0.3, -1.7);
    c = analyze(g, Eigen::VectorXcd::Constant(g.size(), k), 12);
    CHECK(std::abs(c[0] - k * std::sqrt(4 * kPi)) <= 1e-12);
    CHECK(c.tail(c.size() - 1).cwiseAbs().maxCoeff() <= 1e-12);

    c = analyze(g, sample(g, 1, 0) + 2.0 * sample(g, 2, 1), 12);
    CHECK(std::abs(c[flat_index(1, 0)] - 1.0) <= 1e-12);
    CHECK(std::abs(c[flat_index(2, 1)] - 2.0) <= 1e-12);
}

TEST_CASE("round trip and Parseval") {
    const int L = 18;
    const auto g = build_grid(L);
    const auto c = random_coeffs(L, 99);
    const auto f = synthesize(g, c, L);
    const auto back = analyze(g, f, L);
    CHECK((back - c).cwiseAbs().maxCoeff() <= 1e-11);
    CHECK((synthesize(g, back, L) - f).cwiseAbs().maxCoeff() <= 1e-11);
    const double energy = integrate(g, f.cwiseAbs2().cast<cd>()).real();
    CHECK(std::abs(energy - c.squaredNorm()) <= 1e-10 * c.squaredNorm());
}

TEST_CASE("cap membership") {
    const CapRegion cap(Vec3(0, 0, 1), kPi / 6);
    CHECK(in_cap(cap, Vec3(0, 0, 1)));
    CHECK_FALSE(in_cap(cap, Vec3(0, 0, -1)));
    CHECK_FALSE(in_cap(cap, Vec3(std::sin(kPi / 6), 0.0, std::cos(kPi / 6))));

    const auto g = build_grid(20);
    double area = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (in_cap(cap, g.direction(i))) area += g.nodes[i].weight;
    const double exact = 2 * kPi * (1 - std::cos(kPi / 6));
    CHECK(std::abs(area - exact) <= 0.02 * exact);

    const CapRegion outside(Vec3(0, 0, 1), kPi / 3, CapSense::Exterior);
    CHECK(in_cap(outside, Vec3(0, 0, -1)));
    CHECK_FALSE(in_cap(outside, Vec3(0, 0, 1)));
    const auto canon = outside.canonical();
    CHECK((canon.axis - Vec3(0, 0, -1)).norm() <= 1e-15);
    CHECK(canon.aperture == doctest::Approx(2 * kPi / 3));
}

TEST_CASE("cap validation") {
    CHECK_THROWS_AS(CapRegion(Vec3(0, 0, 1), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(CapRegion(Vec3(0, 0, 1), kPi), std::invalid_argument);
    CHECK_THROWS_AS(CapRegion(Vec3(0, 0, 0), 0.5), std::invalid_argument);
    const CapRegion c(Vec3(3, 0, 4), 0.5);
    CHECK(std::abs(c.axis.norm() - 1.0) <= 1e-14);
}

TEST_CASE("frames align the cap axis with +z") {
    for (const Vec3& a : {Vec3(1, 0, 0), Vec3(0, 0, -1), Vec3(0.3, -0.4, 0.2), Vec3(0, 0, 1)}) {
        const Frame f = Frame::aligned_to(a);
        CHECK((f.to_local(a.normalized()) - Vec3(0, 0, 1)).norm() <= 1e-14);
        CHECK((f.R * f.R.transpose() - Eigen::Matrix3d::Identity()).norm() <= 1e-14);
        CHECK(f.R.determinant() == doctest::Approx(1.0));
        const Vec3 v(0.1, 0.7, -0.2);
        CHECK((f.to_world(f.to_local(v)) - v).norm() <= 1e-15);
    }
}

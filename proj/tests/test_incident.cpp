#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cloaksynth/incident.hpp"

using namespace cloak;

namespace {

const double kPi = std::numbers::pi;

// Jacobi-Anger series at a point of radius r.
cd series(double k, const Vec3& alpha, const Vec3& x, int L) {
    const double r = x.norm();
    const auto c = plane_wave_coefficients(k, r, alpha, L);
    double th, ph;
    to_polar(x, th, ph);
    return spherical_harmonics_all(L, th, ph).cwiseProduct(c).sum();
}

}  // namespace

TEST_CASE("trace examples") {
    WaveContext ctx;
    ctx.k = 2.0;
    ctx.a = 1.5;
    // Single equatorial ring: alpha = +z is tangent at every node.
    const auto eq = build_grid(1, 8, 0);
    auto t = plane_wave_trace(ctx, eq);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
        CHECK(std::abs(t.values[i] - 1.0) <= 1e-15);
        CHECK(std::abs(t.normal_derivatives[i]) <= 1e-15);
    }

    const auto g = build_grid(10);
    ctx.k = kPi;
    ctx.a = 1.0;
    ctx.alpha = g.direction(17);
    t = plane_wave_trace(ctx, g);
    CHECK(std::abs(t.values[17] + 1.0) <= 1e-14);
    CHECK(std::abs(t.normal_derivatives[17] - cd(0.0, -kPi)) <= 1e-13);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
        CHECK(std::abs(std::abs(t.values[i]) - 1.0) <= 1e-15);
        const double c = ctx.alpha.dot(g.direction(i));
        CHECK(std::abs(t.normal_derivatives[i] - cd(0.0, ctx.k * c) * t.values[i]) <= 1e-14);
    }
}

TEST_CASE("Jacobi-Anger coefficients") {
    WaveContext ctx;
    ctx.k = 1.0;
    ctx.a = 1.0;
    auto c = plane_wave_coefficients(ctx, 8);
    CHECK(std::abs(c[0] - std::sqrt(4 * kPi) * std::sin(1.0)) <= 1e-13);
    CHECK(c[0].real() == doctest::Approx(2.9829370).epsilon(1e-7));
    for (int l = 0; l <= 8; ++l)
        for (int m = -l; m <= l; ++m)
            if (m != 0) CHECK(std::abs(c[flat_index(l, m)]) <= 1e-15);
    ctx.incident = false;
    CHECK(plane_wave_coefficients(ctx, 8).isZero(0.0));
}

TEST_CASE("analysis of the trace matches the expansion") {
    WaveContext ctx;
    ctx.k = 3.0;
    ctx.a = 1.0;
    ctx.alpha = Vec3(0.3, -0.5, 0.8).normalized();
    const int L = 30;
    const auto g = build_grid(L);
    const auto t = plane_wave_trace(ctx, g);
    const auto a = analyze(g, t.values, L);
    const auto c = plane_wave_coefficients(ctx, L);
    double worst = 0.0;
    for (int l = 0; l <= L - 5; ++l)
        for (int m = -l; m <= l; ++m) worst = std::max(worst, std::abs(a[flat_index(l, m)] - c[flat_index(l, m)]));
    CHECK(worst <= 1e-10);
}

TEST_CASE("series reproduces the plane wave") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0), r(0.2, 3.0);
    const double k = 2.0;
    const Vec3 alpha = Vec3(1, 2, -2).normalized();
    const int L = static_cast<int>(std::ceil(k * 3.0)) + 15;
    double worst = 0.0;
    for (int s = 0; s < 40; ++s) {
        Vec3 x(u(gen), u(gen), u(gen));
        x = x.normalized() * r(gen);
        worst = std::max(worst, std::abs(series(k, alpha, x, L) - std::exp(cd(0.0, k * alpha.dot(x)))));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("rotation equivariance") {
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    const Vec3 alpha = Vec3(0.2, 0.1, 0.9).normalized();
    const Vec3 x = Vec3(-0.4, 0.8, 0.3).normalized();
    const int L = 25;
    const cd a = series(1.7, alpha, x, L);
    const cd b = series(1.7, R * alpha, R * x, L);
    CHECK(std::abs(a - b) <= 1e-12);
}

TEST_CASE("context validation") {
    WaveContext ctx;
    CHECK_NOTHROW(ctx.validate());
    ctx.k = 0.0;
    CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
    ctx.k = 1.0;
    ctx.a = -1.0;
    CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
    ctx.a = 1.0;
    ctx.alpha = Vec3(0, 0, 2);
    CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
    ctx.alpha = Vec3(0, 0, 1);
    ctx.h = cd(1.0, -0.1);
    CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
    ctx.h = Impedance::nodal({cd(1.0), cd(1.0, -1e-3)});
    CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
    ctx.h = Impedance::nodal({cd(1.0), cd(1.0, 2.0)});
    CHECK_NOTHROW(ctx.validate());
}

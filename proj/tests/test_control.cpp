#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cloaksynth/control.hpp"

using namespace cloak;

namespace {

const double kPi = std::numbers::pi;
const double kAperture = kPi / 6;

WaveContext flagship_ctx() {
    WaveContext ctx;
    ctx.k = 2.0;
    ctx.a = 1.0;
    ctx.h = 1.0;
    return ctx;
}

// One factorized mixed problem shared by the operator tests.
struct Shared {
    WaveContext ctx = flagship_ctx();
    CapRegion cap{Vec3(0, 0, 1), kAperture};
    int L = 12;
    SurfaceGrid grid = build_grid(12);
    ScatterOperator op{ctx, cap, grid, 12};
};

const Shared& shared() {
    static const Shared s;
    return s;
}

Eigen::VectorXcd random_vec(Eigen::Index n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cd(u(gen), u(gen));
    return v;
}

FarFieldPattern pattern_of(const Eigen::VectorXcd& a) {
    FarFieldPattern p;
    p.k = 2.0;
    p.L_max = static_cast<int>(std::lround(std::sqrt(static_cast<double>(a.size())))) - 1;
    p.a = a;
    return p;
}

}  // namespace

TEST_CASE("basis layout and support") {
    const CapRegion cap(Vec3(1, 0, 1), kAperture);
    const ControlBasis b(cap, 4, 2);
    CHECK(b.size() == 20);
    for (int j = 0; j < b.size(); ++j) {
        const auto it = b.item(j);
        CHECK(b.index(it.p, it.m) == j);
    }
    CHECK(b.item(0).m == -2);
    CHECK(b.item(4).m == -1);
    CHECK(ControlBasis(cap, 0, 3).size() == 0);
    CHECK_THROWS_AS(ControlBasis(cap, -1, 0), std::invalid_argument);

    const auto g = build_grid(40);
    double edge = 0.0, outside = 0.0;
    const Frame f = cap.frame();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 n = g.direction(i);
        double th, ph;
        to_polar(f.to_local(n), th, ph);
        for (int j = 0; j < b.size(); ++j) {
            const double v = std::abs(b.value(j, n));
            if (!in_cap(cap, n)) outside = std::max(outside, v);
            else if (th / kAperture > 0.999) edge = std::max(edge, v);
        }
    }
    CHECK(outside == 0.0);
    CHECK(edge <= 1e-12);
    // Dense sampling near the edge, where the grid has few nodes.
    for (double t : {0.9991, 0.9995, 0.9999})
        for (int j = 0; j < b.size(); ++j) CHECK(std::abs(b.value_local(j, t * kAperture, 0.3)) <= 1e-12);
}

TEST_CASE("Gram matrix") {
    const CapRegion cap(Vec3(0, 0, 1), kAperture);
    const ControlBasis b(cap, 3, 2);
    const auto G = b.gram();
    const auto g = build_grid(200);
    Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(b.size(), b.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.nodes[i].theta >= kAperture) continue;
        Eigen::VectorXcd v(b.size());
        for (int j = 0; j < b.size(); ++j) v[j] = b.value_local(j, g.nodes[i].theta, g.nodes[i].phi);
        Q += g.nodes[i].weight * v.conjugate() * v.transpose();
    }
    CHECK((G - Q).cwiseAbs().maxCoeff() <= 1e-8 * G.cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(std::isfinite(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff()));
}

TEST_CASE("spectral coefficients match analysis") {
    const CapRegion cap(Vec3(0, 0, 1), kAperture);
    const ControlBasis b(cap, 3, 2);
    const Eigen::VectorXcd gvec = random_vec(b.size(), 11);
    const ControlFunction w{b, gvec};
    const int L = 20;
    const auto spec = b.spectral(gvec, L).to_flat(L);
    const auto g = build_grid(200);
    Eigen::VectorXcd s(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s[i] = w.value_local(g.nodes[i].theta, g.nodes[i].phi);
    const auto ref = analyze(g, s, L);
    CHECK((spec - ref).cwiseAbs().maxCoeff() <= 1e-8 * ref.cwiseAbs().maxCoeff());
    CHECK(std::abs(w.l2_norm() - std::sqrt(integrate(g, s.cwiseAbs2().cast<cd>()).real())) <= 1e-8 * w.l2_norm());
    CHECK_THROWS_AS(b.spectral(Eigen::VectorXcd::Zero(2), L), std::invalid_argument);
}

TEST_CASE("control smoothness along a polar line") {
    const ControlBasis b(CapRegion(Vec3(0, 0, 1), kAperture), 6, 4);
    const ControlFunction w{b, random_vec(b.size(), 12)};
    double bound = 0.0;
    for (int j = 0; j < b.size(); ++j) bound += std::abs(w.g[j]) * b.theta_derivative_bound(j);
    // Ten samples per spacing of the L = 22 grid.
    const double h = kPi / 46 / 10;
    double worst = 0.0;
    for (double th = 0.0; th + h < kAperture; th += h)
        worst = std::max(worst, std::abs(w.value_local(th + h, 0.7) - w.value_local(th, 0.7)) / h);
    CHECK(worst <= bound);
}

TEST_CASE("operator columns are far fields of the basis functions") {
    const auto& s = shared();
    const ControlBasis b(s.cap, 2, 1);
    const auto op = assemble_control_operator(s.op, b);
    CHECK(op.L.rows() == harmonic_count(s.L));
    CHECK(op.L.cols() == 6);
    CHECK(op.reports.size() == 6u);
    for (const auto& r : op.reports) CHECK(r.method == "mixed");

    const int Li = s.op.internal_degree();
    for (int j = 0; j < b.size(); ++j) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(b.size());
        e[j] = 1.0;
        const ControlFunction w{b, e};
        const auto direct = far_field(s.op.solve(s.ctx.alpha, false, w.boundary_data(Li)).field).a;
        CHECK((op.L.col(j) - direct).cwiseAbs().maxCoeff() <= 1e-12 * direct.cwiseAbs().maxCoeff());
        const ControlFunction w2{b, 2.0 * e};
        const auto twice = far_field(s.op.solve(s.ctx.alpha, false, w2.boundary_data(Li)).field).a;
        CHECK((twice - 2.0 * op.L.col(j)).cwiseAbs().maxCoeff() <= 1e-12 * twice.cwiseAbs().maxCoeff());
    }

    CHECK(assemble_control_operator(s.op, ControlBasis(s.cap, 0, 2)).L.cols() == 0);
}

TEST_CASE("A0 plus L g matches a direct solve") {
    const auto& s = shared();
    const ControlBasis b(s.cap, 3, 2);
    const auto L = assemble_control_operator(s.op, b).L;
    const auto A0 = compute_A0(s.op, s.ctx);
    const int Li = s.op.internal_degree();
    for (unsigned seed = 1; seed <= 3; ++seed) {
        const ControlFunction w{b, random_vec(b.size(), seed)};
        const auto direct = far_field(s.op.solve(s.ctx.alpha, true, w.boundary_data(Li)).field).a;
        CHECK((direct - A0.a - L * w.g).norm() <= 1e-10 * A0.a.norm());
    }
}

TEST_CASE("Tikhonov synthesis on a synthetic operator") {
    const ControlBasis b(CapRegion(Vec3(0, 0, 1), kAperture), 2, 1);
    const int n = b.size();
    const auto A0 = pattern_of(random_vec(25, 1));
    Eigen::MatrixXcd L(25, n);
    for (int j = 0; j < n; ++j) L.col(j) = random_vec(25, 100 + j);
    const Eigen::MatrixXcd G = b.gram();

    SUBCASE("stationarity and bookkeeping") {
        const double lam = 0.3;
        const auto r = synthesize(A0, L, b, lam);
        const Eigen::VectorXcd grad = L.adjoint() * (A0.a + L * r.w.g) + lam * lam * G * r.w.g;
        CHECK(grad.norm() <= 1e-10 * (L.adjoint() * A0.a).norm());
        CHECK(r.sigma_before == doctest::Approx(A0.a.squaredNorm()).epsilon(1e-15));
        CHECK(r.sigma_after == doctest::Approx((A0.a + L * r.w.g).squaredNorm()).epsilon(1e-12));
        CHECK(r.reduction_db == doctest::Approx(10 * std::log10(r.sigma_before / r.sigma_after)).epsilon(1e-12));
        CHECK(r.control_norm == doctest::Approx(std::sqrt((r.w.g.adjoint() * G * r.w.g)(0).real())).epsilon(1e-12));
        CHECK(r.lambda_used == lam);
        CHECK(r.objective_value <= r.sigma_before);
        CHECK_FALSE(r.ill_conditioned);
    }

    SUBCASE("feasibility and monotonicity in lambda") {
        double prev_sigma = -1.0, prev_norm = 1e300;
        for (double lam : {0.0, 1e-8, 1e-4, 1e-2, 1.0, 10.0}) {
            const auto r = synthesize(A0, L, b, lam);
            CHECK(r.sigma_after <= r.sigma_before);
            CHECK(r.sigma_after >= prev_sigma * (1 - 1e-12));
            CHECK(r.control_norm <= prev_norm * (1 + 1e-12));
            prev_sigma = r.sigma_after;
            prev_norm = r.control_norm;
        }
    }

    SUBCASE("degenerate inputs") {
        auto r = synthesize(pattern_of(Eigen::VectorXcd::Zero(25)), L, b, 1e-3);
        CHECK(r.w.g.isZero(0.0));
        CHECK(r.sigma_after == 0.0);
        r = synthesize(A0, Eigen::MatrixXcd::Zero(25, n), b, 1e-3);
        CHECK(r.w.g.isZero(0.0));
        CHECK(r.sigma_after == r.sigma_before);
        CHECK_THROWS_AS(synthesize(A0, L, b, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(synthesize(A0, L.leftCols(2), b, 0.0), std::invalid_argument);
    }

    SUBCASE("rank deficiency at lambda = 0") {
        Eigen::MatrixXcd D = L;
        D.col(1) = D.col(0);  // b_0 and b_1 share an azimuthal order, so W couples them
        const auto r = synthesize(A0, D, b, 0.0);
        CHECK(r.ill_conditioned);
        CHECK(r.sigma_after <= r.sigma_before);
        // Still a least-squares minimizer.
        const Eigen::VectorXcd grad = D.adjoint() * (A0.a + D * r.w.g);
        CHECK(grad.norm() <= 1e-9 * (D.adjoint() * A0.a).norm());
    }

    SUBCASE("discrepancy choice") {
        const std::vector<double> lams{1e-6, 1e-3, 0.1, 1.0, 3.0};
        const auto pick = synthesize_discrepancy(A0, L, b, lams);
        const double floor_sigma = synthesize(A0, L, b, 0.0).sigma_after;
        CHECK(pick.sigma_after <= 1.1 * floor_sigma);
        for (double lam : lams)
            if (lam > pick.lambda_used) CHECK(synthesize(A0, L, b, lam).sigma_after > 1.1 * floor_sigma);
        CHECK_THROWS_AS(synthesize_discrepancy(A0, L, b, {}), std::invalid_argument);
    }
}

TEST_CASE("density experiment") {
    const auto& s = shared();
    const std::vector<BasisSize> sizes{{1, 0}, {2, 1}, {3, 1}};
    auto zero = FarFieldPattern::zero(s.ctx.k, s.L, s.op.frame());
    for (double r : density_experiment(s.op, zero, sizes)) CHECK(r == 0.0);

    // A target in the range of the smallest basis.
    const ControlBasis small(s.cap, 1, 0);
    auto in_range = zero;
    in_range.a = assemble_control_operator(s.op, small).L.col(0);
    for (double r : density_experiment(s.op, in_range, sizes)) CHECK(r <= 1e-10 * in_range.a.norm());

    const auto target = random_pattern(s.ctx.k, s.L, 6, 12345, s.op.frame());
    std::vector<SolveReport> reports;
    const auto res = density_experiment(s.op, target, sizes, 1, &reports);
    CHECK(reports.size() == 9u);
    REQUIRE(res.size() == 3u);
    CHECK(res[0] <= target.a.norm());
    for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i] <= res[i - 1] + 1e-10);

    CHECK(density_experiment(s.op, target, {}).empty());
    CHECK_THROWS_AS(density_experiment(s.op, target, {{2, 1}, {1, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(density_experiment(s.op, random_pattern(2.0, 5, 3, 1), sizes), std::invalid_argument);
}

TEST_CASE("random target pattern") {
    const auto p = random_pattern(2.0, 10, 6, 12345);
    const auto q = random_pattern(2.0, 10, 6, 12345);
    CHECK(p.a == q.a);
    CHECK(p.a != random_pattern(2.0, 10, 6, 12346).a);
    for (int l = 0; l <= 10; ++l)
        for (int m = -l; m <= l; ++m) {
            const cd v = p.a[flat_index(l, m)];
            if (l > 6) {
                CHECK(v == cd(0.0));
            } else {
                CHECK(v.real() >= -1.0);
                CHECK(v.real() < 1.0);
                CHECK(v.imag() >= -1.0);
                CHECK(v.imag() < 1.0);
            }
        }
    // First draw of mt19937_64 seeded 12345, top 53 bits mapped to [-1, 1).
    std::mt19937_64 gen(12345);
    const double first = 2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0;
    CHECK(p.a[0].real() == first);
}

TEST_CASE("a failing column aborts assembly") {
    const auto& s = shared();
    SolverOptions o;
    o.resid_tol = 1e-12;
    const ScatterOperator tight(s.ctx, s.cap, s.grid, s.L, o);
    try {
        (void)assemble_control_operator(tight, ControlBasis(s.cap, 1, 0));
        FAIL("expected non-convergence");
    } catch (const NonConvergenceError& e) {
        CHECK(std::string(e.what()).find("control column (p=0, m=0)") != std::string::npos);
    }
}

#include "cloaksynth/farfield.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cloak {

FarFieldPattern FarFieldPattern::zero(double k, int L_max, const Frame& frame) {
    FarFieldPattern p;
    p.k = k;
    p.frame = frame;
    p.L_max = L_max;
    p.a = Eigen::VectorXcd::Zero(harmonic_count(L_max));
    return p;
}

FarFieldPattern far_field(const RadiatingField& v) {
    FarFieldPattern p = FarFieldPattern::zero(v.k, v.L_max, v.frame);
    cd f = cd(0.0, -1.0) / v.k;  // (-i)^{l+1} / k
    for (int l = 0; l <= v.L_max; ++l) {
        for (int m = -l; m <= l; ++m) p.a[flat_index(l, m)] = v.c[flat_index(l, m)] * f;
        f *= cd(0.0, -1.0);
    }
    return p;
}

double sigma(const FarFieldPattern& p) { return p.a.squaredNorm(); }

cd eval_pattern(const FarFieldPattern& p, const Vec3& beta) {
    double th, ph;
    to_polar(p.frame.to_local(beta), th, ph);
    return spherical_harmonics_all(p.L_max, th, ph).cwiseProduct(p.a).sum();
}

double sigma_by_quadrature(const FarFieldPattern& p, const SurfaceGrid& grid) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        s += grid.nodes[i].weight * std::norm(eval_pattern(p, grid.direction(i)));
    return s;
}

double optical_theorem_residual(const FarFieldPattern& p, const WaveContext& ctx) {
    const double s = sigma(p);
    const double forward = 4.0 * std::numbers::pi / ctx.k * eval_pattern(p, ctx.alpha).imag();
    const double r = std::abs(s - forward);
    if (r == 0.0) return 0.0;
    return r / std::max(s, 1e-300);
}

double reciprocity_residual(const ScatterOperator& op, const Vec3& alpha, const Vec3& beta) {
    const BoundaryData none;
    const auto p1 = far_field(op.solve(alpha, true, none).field);
    const auto p2 = far_field(op.solve(-beta, true, none).field);
    const cd A1 = eval_pattern(p1, beta);
    const cd A2 = eval_pattern(p2, -alpha);
    const double d = std::abs(A1 - A2);
    if (d == 0.0) return 0.0;
    return d / std::max({std::abs(A1), std::abs(A2), 1e-300});
}

double reciprocity_residual(const WaveContext& ctx, const CapRegion& cap, const SurfaceGrid& grid,
                            int L_max, const Vec3& beta, const SolverOptions& opt) {
    const ScatterOperator op(ctx, cap, grid, L_max, opt);
    return reciprocity_residual(op, ctx.alpha, beta);
}

}  // namespace cloak

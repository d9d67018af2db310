#pragma once

#include <Eigen/Dense>

#include "cloaksynth/incident.hpp"
#include "cloaksynth/solver.hpp"
#include "cloaksynth/sphere_grid.hpp"

namespace cloak {

// A(beta) = sum a_lm Y_lm(beta), with beta rotated into `frame` first.
struct FarFieldPattern {
    double k = 1.0;
    Frame frame;
    int L_max = 0;
    Eigen::VectorXcd a;

    static FarFieldPattern zero(double k, int L_max, const Frame& frame = {});
};

FarFieldPattern far_field(const RadiatingField& v);
double sigma(const FarFieldPattern& p);
// Cross-check of sigma by quadrature of |A|^2 on a grid.
double sigma_by_quadrature(const FarFieldPattern& p, const SurfaceGrid& grid);
cd eval_pattern(const FarFieldPattern& p, const Vec3& beta);
double optical_theorem_residual(const FarFieldPattern& p, const WaveContext& ctx);
double reciprocity_residual(const WaveContext& ctx, const CapRegion& cap, const SurfaceGrid& grid,
                            int L_max, const Vec3& beta, const SolverOptions& opt = {});
// Same check reusing a factorized operator.
double reciprocity_residual(const ScatterOperator& op, const Vec3& alpha, const Vec3& beta);

}  // namespace cloak

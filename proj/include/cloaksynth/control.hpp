#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cloaksynth/farfield.hpp"
#include "cloaksynth/solver.hpp"
#include "cloaksynth/sphere_grid.hpp"

namespace cloak {

// Bumps b_j = eta(t) t^|m| T_2p(t) e^{i m phi} on the cap, t = theta / aperture,
// eta(t) = exp(1 - 1/(1 - t^2)); angles are cap-frame. Ordered by m = -M..M, then p.
class ControlBasis {
public:
    struct Item {
        int p;
        int m;
    };

    ControlBasis() = default;
    ControlBasis(const CapRegion& cap, int P, int M);

    const CapRegion& cap() const { return cap_; }
    int P() const { return P_; }
    int M() const { return M_; }
    int size() const { return P_ * (2 * M_ + 1); }
    Item item(int j) const { return {j % P_, j / P_ - M_}; }
    int index(int p, int m) const { return (m + M_) * P_ + p; }

    static double profile(int p, int m, double t);
    static double profile_derivative(int p, int m, double t);  // d/dt
    cd value_local(int j, double theta, double phi) const;
    cd value(int j, const Vec3& dir) const;
    // max over the cap of |d b_j / d theta|, sampled densely from the analytic derivative.
    double theta_derivative_bound(int j) const;

    // L2(F) Gram matrix, block diagonal in m.
    Eigen::MatrixXcd gram() const;
    // Cap-frame coefficients of sum_j g_j b_j up to degree L.
    ModalCoefficients spectral(const Eigen::VectorXcd& g, int L) const;
    // (L + 1) x P real block: column p holds the spectrum of b_{p,m}.
    Eigen::MatrixXd spectral_block(int m, int L) const;

private:
    CapRegion cap_;
    Frame frame_;
    double theta0_ = 0.0;
    int P_ = 0;
    int M_ = 0;
};

struct ControlFunction {
    ControlBasis basis;
    Eigen::VectorXcd g;

    cd value(const Vec3& dir) const;
    cd value_local(double theta, double phi) const;
    double l2_norm() const;
    BoundaryData boundary_data(int L) const;
};

struct SynthesisResult {
    ControlFunction w;
    double sigma_before = 0.0;
    double sigma_after = 0.0;
    double reduction_db = 0.0;
    double control_norm = 0.0;
    double lambda_used = 0.0;
    double objective_value = 0.0;
    bool ill_conditioned = false;
    FarFieldPattern controlled;  // A0 + L g
};

struct ControlOperator {
    Eigen::MatrixXcd L;  // far-field coefficients x basis
    std::vector<SolveReport> reports;
};

ControlOperator assemble_control_operator(const ScatterOperator& op, const ControlBasis& basis,
                                          unsigned jobs = 1);
Eigen::MatrixXcd assemble_control_operator(const WaveContext& ctx, const CapRegion& cap,
                                           const ControlBasis& basis, const SurfaceGrid& grid,
                                           int L_max);

FarFieldPattern compute_A0(const ScatterOperator& op, const WaveContext& ctx,
                           SolveReport* report = nullptr);
FarFieldPattern compute_A0(const WaveContext& ctx, const CapRegion& cap, const SurfaceGrid& grid,
                           int L_max);

// Minimizes |A0 + L g|^2 + lambda^2 |g|_W^2 with W the basis Gram matrix.
SynthesisResult synthesize(const FarFieldPattern& A0, const Eigen::MatrixXcd& L,
                           const ControlBasis& basis, double lambda);

// Largest lambda whose sigma_after stays within 10% of the lambda = 0 value.
SynthesisResult synthesize_discrepancy(const FarFieldPattern& A0, const Eigen::MatrixXcd& L,
                                       const ControlBasis& basis, std::vector<double> lambdas);

using BasisSize = std::pair<int, int>;  // (P, M)

// min_g |target - L g| for each nested basis size.
std::vector<double> density_experiment(const ScatterOperator& op, const FarFieldPattern& target,
                                       const std::vector<BasisSize>& sizes, unsigned jobs = 1,
                                       std::vector<SolveReport>* reports = nullptr);
std::vector<double> density_experiment(const WaveContext& ctx, const CapRegion& cap,
                                       const SurfaceGrid& grid, int L_max,
                                       const FarFieldPattern& target,
                                       const std::vector<BasisSize>& sizes);

// Seeded random pattern: real and imaginary parts uniform in [-1, 1) for l <= L_band, zero above.
FarFieldPattern random_pattern(double k, int L_max, int L_band, unsigned long long seed,
                               const Frame& frame = {});

}  // namespace cloak

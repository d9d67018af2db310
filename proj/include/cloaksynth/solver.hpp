#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cloaksynth/incident.hpp"
#include "cloaksynth/sphere_grid.hpp"
#include "cloaksynth/specfun.hpp"

namespace cloak {

// Outgoing expansion v = sum c_lm h_l(kr) Y_lm, with Y_lm taken in `frame`.
struct RadiatingField {
    double k = 1.0;
    double a = 1.0;
    Frame frame;
    int L_max = 0;
    Eigen::VectorXcd c;

    // v at a world-frame point with |x| >= a.
    cd value(const Vec3& x) const;
};

struct SolveReport {
    double relative_residual = 0.0;
    double condition_estimate = 1.0;
    double truncation_tail = 0.0;
    bool under_resolved = false;
    std::string method;  // "dirichlet", "impedance" or "mixed"
    int internal_degree = 0;
    int edge_basis_size = 0;
    int residual_nodes = 0;
};

class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, SolveReport r)
        : std::runtime_error(what), report(std::move(r)) {}
    SolveReport report;
};

class IllPosedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cap-frame coefficients grouped by azimuthal order: mode(m)[l] for l = 0..L, |m| <= M.
struct ModalCoefficients {
    int L = -1;
    int M = -1;
    std::vector<Eigen::VectorXcd> modes;

    ModalCoefficients() = default;
    ModalCoefficients(int L, int M);
    bool empty() const { return L < 0; }
    Eigen::VectorXcd& mode(int m) { return modes[m + M]; }
    const Eigen::VectorXcd& mode(int m) const { return modes[m + M]; }
    cd at(int l, int m) const;
    static ModalCoefficients from_flat(const Eigen::VectorXcd& c, int L);
    Eigen::VectorXcd to_flat(int L_out) const;
    ModalCoefficients& add_scaled(const ModalCoefficients& o, cd s);
};

// Dirichlet data w on F, in the cap frame.
class BoundaryData {
public:
    BoundaryData() = default;

    // Samples per grid node (grid in the cap frame); entries outside F are ignored.
    static BoundaryData from_nodes(const SurfaceGrid& grid, const CapRegion& cap,
                                   const Eigen::VectorXcd& samples);
    // Spectral coefficients plus a pointwise evaluator w(theta, phi) for residual checks.
    static BoundaryData from_modes(ModalCoefficients coeffs,
                                   std::function<cd(double, double)> evaluator);

    bool is_zero() const { return coeffs_.empty(); }
    const ModalCoefficients& coefficients() const { return coeffs_; }
    // Exact data at grid node i (cap-frame direction theta, phi).
    cd at_node(std::size_t i, double theta, double phi) const;

private:
    ModalCoefficients coeffs_;
    std::function<cd(double, double)> evaluator_;
    Eigen::VectorXcd samples_;
};

// Total surface trace u and normal derivative u_N, resolved to the internal degree.
struct SurfaceTrace {
    Frame frame;
    int L = -1;
    ModalCoefficients u;
    ModalCoefficients u_n;

    // Filtered evaluation at a world-frame unit direction.
    cd value(const Vec3& dir) const;
    cd normal_derivative(const Vec3& dir) const;
};

struct ScatterResult {
    RadiatingField field;
    SolveReport report;
    SurfaceTrace trace;
};

struct SolverOptions {
    int edge_basis_size = 0;   // 0 selects a size from L_max
    int internal_degree = 0;   // 0 selects a degree from L_max
    double resid_tol = 0.0;    // 0 selects 1e-6, or 1e-3 with a cap interface
    double rank_tol = 1e-12;
    int guard_rings = 2;
    unsigned jobs = 1;
};

// Factorized exterior problem for one geometry (k, a, h, cap, bc variant).
// Immutable after construction; solve() may be called concurrently.
class ScatterOperator {
public:
    ScatterOperator(const WaveContext& ctx, const CapRegion& cap, const SurfaceGrid& grid,
                    int L_max, const SolverOptions& opt = {});
    ~ScatterOperator();
    ScatterOperator(ScatterOperator&&) noexcept;

    // Incident direction is a world-frame vector.
    ScatterResult solve(const Vec3& alpha, bool incident, const BoundaryData& w) const;
    ScatterResult solve(const WaveContext& ctx, const BoundaryData& w) const;

    const Frame& frame() const;
    const CapRegion& cap() const;
    const SurfaceGrid& grid() const;
    int L_max() const;
    int internal_degree() const;
    double cap_cos() const;           // cos of the canonical aperture
    bool has_interface() const;       // both F and F' contain grid nodes
    bool cap_has_nodes() const;
    double k() const;
    double a() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ScatterResult solve_scatter(const WaveContext& ctx, const CapRegion& cap,
                            const Eigen::VectorXcd& w_nodes, const SurfaceGrid& grid, int L_max,
                            const SolverOptions& opt = {});

// Default truncation rule ceil(ka) + 20.
int default_L_max(double ka);

}  // namespace cloak

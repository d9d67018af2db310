#include "cloaksynth/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "cloaksynth/parallel.hpp"
#include "cloaksynth/quadrature.hpp"

namespace cloak {

namespace {

double order_sign(int m) { return (m < 0 && ((-m) % 2)) ? -1.0 : 1.0; }

QuadratureRule cap_rule(double theta0, int L) {
    const int n = static_cast<int>(std::ceil(0.6 * L * theta0)) + 150;
    return gauss_legendre(n, 0.0, theta0);
}

}  // namespace

ControlBasis::ControlBasis(const CapRegion& cap, int P, int M)
    : cap_(cap.canonical()), frame_(cap.frame()), theta0_(cap.canonical().aperture), P_(P), M_(M) {
    if (P < 0 || M < 0) throw std::invalid_argument("basis sizes must be non-negative");
}

double ControlBasis::profile(int p, int m, double t) {
    t = std::abs(t);
    if (t >= 1.0) return 0.0;
    const double eta = std::exp(1.0 - 1.0 / (1.0 - t * t));
    return eta * std::pow(t, std::abs(m)) * std::cos(2.0 * p * std::acos(t));
}

double ControlBasis::profile_derivative(int p, int m, double t) {
    if (t >= 1.0 || t < 0.0) return 0.0;
    const int am = std::abs(m);
    const double s = 1.0 - t * t;
    const double eta = std::exp(1.0 - 1.0 / s);
    const double deta = eta * (-2.0 * t / (s * s));
    const double tm = std::pow(t, am);
    const double dtm = am == 0 ? 0.0 : am * std::pow(t, am - 1);
    const double ac = std::acos(t);
    const double T = std::cos(2.0 * p * ac);
    const double dT = p == 0 ? 0.0 : 2.0 * p * std::sin(2.0 * p * ac) / std::sqrt(s);
    return deta * tm * T + eta * dtm * T + eta * tm * dT;
}

cd ControlBasis::value_local(int j, double theta, double phi) const {
    const auto it = item(j);
    return profile(it.p, it.m, theta / theta0_) * std::exp(cd(0.0, it.m * phi));
}

cd ControlBasis::value(int j, const Vec3& dir) const {
    double th, ph;
    to_polar(frame_.to_local(dir), th, ph);
    return value_local(j, th, ph);
}

double ControlBasis::theta_derivative_bound(int j) const {
    const auto it = item(j);
    double mx = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) / n;
        mx = std::max(mx, std::abs(profile_derivative(it.p, it.m, t)));
    }
    return mx / theta0_;
}

Eigen::MatrixXcd ControlBasis::gram() const {
    const int n = size();
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(n, n);
    const auto q = gauss_legendre(400, 0.0, theta0_);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            const auto ia = item(a), ib = item(b);
            if (ia.m != ib.m) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < q.nodes.size(); ++k) {
                const double t = q.nodes[k] / theta0_;
                s += q.weights[k] * std::sin(q.nodes[k]) * profile(ia.p, ia.m, t) * profile(ib.p, ib.m, t);
            }
            G(a, b) = G(b, a) = 2.0 * std::numbers::pi * s;
        }
    return G;
}

Eigen::MatrixXd ControlBasis::spectral_block(int m, int L) const {
    if (std::abs(m) > M_) throw std::invalid_argument("azimuthal order outside the basis");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(L + 1, P_);
    const auto q = cap_rule(theta0_, L);
    const std::size_t nq = q.nodes.size();
    Eigen::MatrixXd F(nq, P_);
    for (std::size_t k = 0; k < nq; ++k) {
        const double wk = q.weights[k] * std::sin(q.nodes[k]) * 2.0 * std::numbers::pi;
        for (int p = 0; p < P_; ++p) F(k, p) = profile(p, m, q.nodes[k] / theta0_) * wk;
    }
    const double sg = order_sign(m);
    for (std::size_t k = 0; k < nq; ++k) {
        const auto pl = normalized_legendre(L, std::abs(m), std::cos(q.nodes[k]));
        const Eigen::Map<const Eigen::VectorXd> col(pl.data(), L + 1);
        out.noalias() += (sg * col) * F.row(k);
    }
    return out;
}

ModalCoefficients ControlBasis::spectral(const Eigen::VectorXcd& g, int L) const {
    if (g.size() != size()) throw std::invalid_argument("coefficient count does not match basis");
    ModalCoefficients out(L, M_);
    for (int m = -M_; m <= M_; ++m) {
        const Eigen::VectorXcd gm = g.segment(index(0, m), P_);
        if (gm.isZero(0.0)) continue;
        out.mode(m) = spectral_block(m, L).cast<cd>() * gm;
    }
    return out;
}

cd ControlFunction::value_local(double theta, double phi) const {
    cd s = 0.0;
    for (int j = 0; j < basis.size(); ++j)
        if (g[j] != cd(0.0)) s += g[j] * basis.value_local(j, theta, phi);
    return s;
}

cd ControlFunction::value(const Vec3& dir) const {
    double th, ph;
    to_polar(basis.cap().frame().to_local(dir), th, ph);
    return value_local(th, ph);
}

double ControlFunction::l2_norm() const {
    if (basis.size() == 0) return 0.0;
    return std::sqrt(std::max(0.0, (g.adjoint() * basis.gram() * g)(0).real()));
}

BoundaryData ControlFunction::boundary_data(int L) const {
    if (basis.size() == 0 || g.isZero(0.0)) return {};
    auto self = *this;
    return BoundaryData::from_modes(basis.spectral(g, L),
                                    [self](double th, double ph) { return self.value_local(th, ph); });
}

ControlOperator assemble_control_operator(const ScatterOperator& op, const ControlBasis& basis,
                                          unsigned jobs) {
    const int n = basis.size();
    const int Li = op.internal_degree();
    ControlOperator out;
    out.L = Eigen::MatrixXcd::Zero(harmonic_count(op.L_max()), n);
    out.reports.resize(n);
    // One spectral block per azimuthal order, shared by its P columns.
    std::vector<Eigen::MatrixXd> blocks(2 * basis.M() + 1);
    parallel_for(blocks.size(), jobs, [&](std::size_t i) {
        if (basis.P() > 0) blocks[i] = basis.spectral_block(static_cast<int>(i) - basis.M(), Li);
    });
    parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t j) {
        const auto it = basis.item(static_cast<int>(j));
        ModalCoefficients c(Li, basis.M());
        c.mode(it.m) = blocks[it.m + basis.M()].col(it.p).cast<cd>();
        const int jj = static_cast<int>(j);
        const auto w = BoundaryData::from_modes(
            std::move(c), [&basis, jj](double th, double ph) { return basis.value_local(jj, th, ph); });
        try {
            const auto r = op.solve(Vec3(0.0, 0.0, 1.0), false, w);
            out.L.col(static_cast<Eigen::Index>(j)) = far_field(r.field).a;
            out.reports[j] = r.report;
        } catch (const NonConvergenceError& e) {
            throw NonConvergenceError("control column (p=" + std::to_string(it.p) + ", m=" +
                                          std::to_string(it.m) + "): " + e.what(),
                                      e.report);
        }
    });
    return out;
}

Eigen::MatrixXcd assemble_control_operator(const WaveContext& ctx, const CapRegion& cap,
                                           const ControlBasis& basis, const SurfaceGrid& grid,
                                           int L_max) {
    const ScatterOperator op(ctx, cap, grid, L_max);
    return assemble_control_operator(op, basis).L;
}

FarFieldPattern compute_A0(const ScatterOperator& op, const WaveContext& ctx, SolveReport* report) {
    const auto r = op.solve(ctx.alpha, ctx.incident, BoundaryData());
    if (report) *report = r.report;
    return far_field(r.field);
}

FarFieldPattern compute_A0(const WaveContext& ctx, const CapRegion& cap, const SurfaceGrid& grid,
                           int L_max) {
    const ScatterOperator op(ctx, cap, grid, L_max);
    return compute_A0(op, ctx);
}

SynthesisResult synthesize(const FarFieldPattern& A0, const Eigen::MatrixXcd& L,
                           const ControlBasis& basis, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    const int n = basis.size();
    if (L.cols() != n || L.rows() != A0.a.size())
        throw std::invalid_argument("control operator dimensions do not match");
    SynthesisResult res;
    res.sigma_before = sigma(A0);
    res.lambda_used = lambda;
    res.w.basis = basis;
    res.w.g = Eigen::VectorXcd::Zero(n);
    if (n > 0 && !L.isZero(0.0) && !A0.a.isZero(0.0)) {
        const Eigen::MatrixXcd G = basis.gram();
        const Eigen::LLT<Eigen::MatrixXcd> llt(G);
        if (llt.info() != Eigen::Success) throw std::runtime_error("control basis Gram matrix is not positive definite");
        const Eigen::MatrixXcd R = llt.matrixU();
        // M = L R^{-1}
        const Eigen::MatrixXcd Mt =
            R.adjoint().triangularView<Eigen::Lower>().solve(L.adjoint()).adjoint();
        const Eigen::BDCSVD<Eigen::MatrixXcd> svd(Mt, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        const Eigen::VectorXcd proj = svd.matrixU().adjoint() * A0.a;
        Eigen::VectorXcd coef(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (lambda > 0.0) {
                coef[i] = s[i] / (s[i] * s[i] + lambda * lambda) * proj[i];
            } else if (s[i] > 1e-12 * s[0]) {
                coef[i] = proj[i] / s[i];
            } else {
                coef[i] = 0.0;
                res.ill_conditioned = true;
            }
        }
        const Eigen::VectorXcd hvec = -(svd.matrixV() * coef);
        res.w.g = R.triangularView<Eigen::Upper>().solve(hvec);
    }
    res.controlled = A0;
    res.controlled.a = A0.a + L * res.w.g;
    res.sigma_after = sigma(res.controlled);
    res.control_norm = res.w.l2_norm();
    res.objective_value = res.sigma_after + lambda * lambda * res.control_norm * res.control_norm;
    res.reduction_db = 10.0 * std::log10(res.sigma_before / std::max(res.sigma_after, 1e-300));
    if (res.sigma_before == 0.0) res.reduction_db = 0.0;
    return res;
}

SynthesisResult synthesize_discrepancy(const FarFieldPattern& A0, const Eigen::MatrixXcd& L,
                                       const ControlBasis& basis, std::vector<double> lambdas) {
    if (lambdas.empty()) throw std::invalid_argument("lambda list is empty");
    std::sort(lambdas.begin(), lambdas.end());
    const double floor_sigma = synthesize(A0, L, basis, 0.0).sigma_after;
    SynthesisResult best = synthesize(A0, L, basis, lambdas.front());
    for (double lam : lambdas) {
        auto r = synthesize(A0, L, basis, lam);
        if (r.sigma_after <= 1.1 * floor_sigma) best = std::move(r);
    }
    return best;
}

std::vector<double> density_experiment(const ScatterOperator& op, const FarFieldPattern& target,
                                       const std::vector<BasisSize>& sizes, unsigned jobs,
                                       std::vector<SolveReport>* reports) {
    if (sizes.empty()) return {};
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i].first < sizes[i - 1].first || sizes[i].second < sizes[i - 1].second)
            throw std::invalid_argument("density basis sizes must be nested");
    if (target.a.size() != harmonic_count(op.L_max()))
        throw std::invalid_argument("target must be band-limited at the solver's L_max");
    // Columns of the largest basis, ordered so each smaller basis is a prefix.
    const ControlBasis big(op.cap(), sizes.back().first, sizes.back().second);
    std::vector<int> order;
    std::set<int> seen;
    std::vector<int> prefix;
    for (const auto& [P, M] : sizes) {
        for (int m = -M; m <= M; ++m)
            for (int p = 0; p < P; ++p) {
                const int j = big.index(p, m);
                if (seen.insert(j).second) order.push_back(j);
            }
        prefix.push_back(static_cast<int>(order.size()));
    }
    const auto full = assemble_control_operator(op, big, jobs);
    if (reports) *reports = full.reports;
    Eigen::MatrixXcd L(full.L.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t c = 0; c < order.size(); ++c) L.col(static_cast<Eigen::Index>(c)) = full.L.col(order[c]);

    std::vector<double> out;
    if (L.cols() == 0) {
        out.assign(sizes.size(), target.a.norm());
        return out;
    }
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(L);
    const Eigen::VectorXcd qt = qr.householderQ().adjoint() * target.a;
    for (int k : prefix) {
        const Eigen::Index tail = qt.size() - k;
        out.push_back(tail > 0 ? qt.tail(tail).norm() : 0.0);
    }
    return out;
}

std::vector<double> density_experiment(const WaveContext& ctx, const CapRegion& cap,
                                       const SurfaceGrid& grid, int L_max,
                                       const FarFieldPattern& target,
                                       const std::vector<BasisSize>& sizes) {
    const ScatterOperator op(ctx, cap, grid, L_max);
    return density_experiment(op, target, sizes);
}

FarFieldPattern random_pattern(double k, int L_max, int L_band, unsigned long long seed,
                               const Frame& frame) {
    FarFieldPattern p = FarFieldPattern::zero(k, L_max, frame);
    std::mt19937_64 gen(seed);
    auto uni = [&gen] { return 2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0; };
    for (int l = 0; l <= std::min(L_band, L_max); ++l)
        for (int m = -l; m <= l; ++m) {
            const double re = uni();
            const double im = uni();
            p.a[flat_index(l, m)] = cd(re, im);
        }
    return p;
}

}  // namespace cloak

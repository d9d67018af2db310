#include "cloaksynth/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/polygamma.hpp>

#include "cloaksynth/parallel.hpp"
#include "cloaksynth/quadrature.hpp"

namespace cloak {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double order_sign(int m) { return (m < 0 && ((-m) % 2)) ? -1.0 : 1.0; }

// Exponential spectral filter used for pointwise sums of the singular trace.
std::vector<double> spectral_filter(int L) {
    std::vector<double> f(L + 1);
    for (int l = 0; l <= L; ++l) f[l] = std::exp(-36.0 * std::pow(static_cast<double>(l) / L, 8));
    return f;
}

// Weights tw on l in [first, L] with sum_{l>L} t_l ~ sum tw_l t_l for sequences
// behaving like (l+1/2)^{-2,-3} times {1, cos, sin}(2 (l+1/2) theta0).
std::vector<double> tail_weights(int L, double theta0, int& first) {
    first = L / 2;
    const int n = L - first + 1;
    auto basis = [&](double nu, int k) {
        const double p = k < 3 ? nu * nu : nu * nu * nu;
        switch (k % 3) {
            case 0: return 1.0 / p;
            case 1: return std::cos(2.0 * nu * theta0) / p;
            default: return std::sin(2.0 * nu * theta0) / p;
        }
    };
    Eigen::MatrixXd F(n, 6);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 6; ++k) F(i, k) = basis(first + i + 0.5, k);
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(6);
    const double start = L + 1.5;
    tau[0] = boost::math::polygamma(1, start);
    tau[3] = -0.5 * boost::math::polygamma(2, start);
    const int terms = 1000000;
    for (int l = L + 1; l <= L + terms; ++l) {
        const double nu = l + 0.5;
        for (int k : {1, 2, 4, 5}) tau[k] += basis(nu, k);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = svd.singularValues();
    Eigen::VectorXd sinv(6);
    for (int k = 0; k < 6; ++k) sinv[k] = s[k] > 1e-14 * s[0] ? 1.0 / s[k] : 0.0;
    const Eigen::VectorXd tw = svd.matrixU() * sinv.asDiagonal() * svd.matrixV().transpose() * tau;
    return {tw.data(), tw.data() + n};
}

// Orthonormal polynomials for the weight (x0 - x)(1 - x^2)^m on [-1, x0].
struct Recurrence {
    double q0 = 1.0;
    std::vector<double> a, b;  // b[n] = sqrt(beta_n), b[0] unused

    Eigen::MatrixXd evaluate(int N, const std::vector<double>& x) const {
        Eigen::MatrixXd q(N, x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            double prev = 0.0, cur = q0;
            q(0, k) = cur;
            for (int n = 0; n + 1 < N; ++n) {
                const double nxt = ((x[k] - a[n]) * cur - (n > 0 ? b[n] * prev : 0.0)) / b[n + 1];
                prev = cur;
                cur = nxt;
                q(n + 1, k) = cur;
            }
        }
        return q;
    }
};

Recurrence edge_recurrence(int N, int m, double x0) {
    const auto gl = gauss_legendre(N + m + 8, -1.0, x0);
    const std::size_t K = gl.nodes.size();
    std::vector<double> w(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double x = gl.nodes[k];
        w[k] = gl.weights[k] * (x0 - x) * std::pow((1.0 - x) * (1.0 + x), m);
    }
    Recurrence r;
    r.a.assign(N, 0.0);
    r.b.assign(N + 1, 0.0);
    double norm = 0.0;
    for (double v : w) norm += v;
    r.q0 = 1.0 / std::sqrt(norm);
    std::vector<double> prev(K, 0.0), cur(K, r.q0), nxt(K);
    for (int n = 0; n + 1 < N; ++n) {
        double an = 0.0;
        for (std::size_t k = 0; k < K; ++k) an += w[k] * gl.nodes[k] * cur[k] * cur[k];
        r.a[n] = an;
        double bn = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            nxt[k] = (gl.nodes[k] - an) * cur[k] - (n > 0 ? r.b[n] * prev[k] : 0.0);
            bn += w[k] * nxt[k] * nxt[k];
        }
        r.b[n + 1] = std::sqrt(bn);
        for (std::size_t k = 0; k < K; ++k) nxt[k] /= r.b[n + 1];
        std::swap(prev, cur);
        std::swap(cur, nxt);
    }
    return r;
}

enum class Kind { Dirichlet, Impedance, Mixed };

}  // namespace

// ---------------------------------------------------------------------------

ModalCoefficients::ModalCoefficients(int L_, int M_) : L(L_), M(M_) {
    modes.assign(2 * M + 1, Eigen::VectorXcd::Zero(L + 1));
}

cd ModalCoefficients::at(int l, int m) const {
    if (empty() || l > L || std::abs(m) > M || std::abs(m) > l) return 0.0;
    return modes[m + M][l];
}

ModalCoefficients ModalCoefficients::from_flat(const Eigen::VectorXcd& c, int L) {
    ModalCoefficients out(L, L);
    for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) out.mode(m)[l] = c[flat_index(l, m)];
    return out;
}

Eigen::VectorXcd ModalCoefficients::to_flat(int L_out) const {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(harmonic_count(L_out));
    for (int l = 0; l <= L_out; ++l)
        for (int m = -l; m <= l; ++m) c[flat_index(l, m)] = at(l, m);
    return c;
}

ModalCoefficients& ModalCoefficients::add_scaled(const ModalCoefficients& o, cd s) {
    if (o.empty()) return *this;
    if (empty()) {
        *this = ModalCoefficients(o.L, o.M);
    } else if (o.L > L || o.M > M) {
        ModalCoefficients grown(std::max(L, o.L), std::max(M, o.M));
        for (int m = -M; m <= M; ++m) grown.mode(m).head(L + 1) = mode(m);
        *this = std::move(grown);
    }
    for (int m = -o.M; m <= o.M; ++m) mode(m).head(o.L + 1) += s * o.mode(m);
    return *this;
}

BoundaryData BoundaryData::from_nodes(const SurfaceGrid& grid, const CapRegion& cap,
                                      const Eigen::VectorXcd& samples) {
    if (samples.size() != static_cast<Eigen::Index>(grid.size()))
        throw std::invalid_argument("boundary samples must cover every grid node");
    const double x0 = std::cos(cap.canonical().aperture);
    Eigen::VectorXcd masked = Eigen::VectorXcd::Zero(grid.size());
    bool any = false;
    for (int i = 0; i < grid.n_theta; ++i) {
        if (!(grid.cos_theta[i] > x0)) continue;
        for (int j = 0; j < grid.n_phi; ++j) {
            const auto n = grid.node(i, j);
            masked[n] = samples[n];
            any = any || samples[n] != cd(0.0);
        }
    }
    BoundaryData d;
    if (!any) return d;
    d.samples_ = masked;
    d.coeffs_ = ModalCoefficients::from_flat(analyze(grid, masked, grid.L_max), grid.L_max);
    return d;
}

BoundaryData BoundaryData::from_modes(ModalCoefficients coeffs,
                                      std::function<cd(double, double)> evaluator) {
    BoundaryData d;
    d.coeffs_ = std::move(coeffs);
    d.evaluator_ = std::move(evaluator);
    return d;
}

cd BoundaryData::at_node(std::size_t i, double theta, double phi) const {
    if (is_zero()) return 0.0;
    if (samples_.size() > 0) return samples_[i];
    if (evaluator_) return evaluator_(theta, phi);
    throw std::logic_error("boundary data has no pointwise values");
}

namespace {

cd modal_sum(const ModalCoefficients& c, const std::vector<double>& filt, double theta,
             double phi) {
    cd total = 0.0;
    const double x = std::cos(theta);
    for (int am = 0; am <= c.M; ++am) {
        const auto p = normalized_legendre(c.L, am, x);
        for (int m : {am, -am}) {
            const auto& v = c.mode(m);
            cd s = 0.0;
            for (int l = am; l <= c.L; ++l) s += filt[l] * p[l] * v[l];
            total += order_sign(m) * s * std::exp(cd(0.0, m * phi));
            if (am == 0) break;
        }
    }
    return total;
}

}  // namespace

cd SurfaceTrace::value(const Vec3& dir) const {
    double th, ph;
    to_polar(frame.to_local(dir), th, ph);
    return modal_sum(u, spectral_filter(L), th, ph);
}

cd SurfaceTrace::normal_derivative(const Vec3& dir) const {
    double th, ph;
    to_polar(frame.to_local(dir), th, ph);
    return modal_sum(u_n, spectral_filter(L), th, ph);
}

cd RadiatingField::value(const Vec3& x) const {
    const double r = x.norm();
    double th, ph;
    to_polar(frame.to_local(x), th, ph);
    const auto h = spherical_hankel_h1_array(L_max, k * r);
    const auto y = spherical_harmonics_all(L_max, th, ph);
    cd s = 0.0;
    for (int l = 0; l <= L_max; ++l)
        for (int m = -l; m <= l; ++m) s += c[flat_index(l, m)] * h[l] * y[flat_index(l, m)];
    return s;
}

int default_L_max(double ka) { return static_cast<int>(std::ceil(ka)) + 20; }

// ---------------------------------------------------------------------------

struct ScatterOperator::Impl {
    double k = 1, a = 1;
    cd h = 0.0;
    BcVariant variant = BcVariant::MixedImpedance;
    CapRegion cap;
    Frame frame;
    SurfaceGrid grid;
    int L_max = 0;
    SolverOptions opt;

    double theta0 = 0, x0 = 1;
    int n_F = 0, n_Fp = 0;
    Kind kind = Kind::Mixed;
    int L_int = 0, N = 0, M = 0, L_s = 0;

    std::vector<cd> kappa;      // k h_l'(ka) / h_l(ka)
    std::vector<cd> hank;       // h_l(ka), l <= L_max
    std::vector<double> bessel; // j_l(ka), l <= L_max
    std::vector<cd> s0_radial;  // -i k / ((ka)^2 h_l(ka)), l <= L_s
    std::vector<double> filt;

    std::vector<Eigen::MatrixXd> phi;  // per |m|: N x (L_int + 1) basis projections
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu;
    double cond = 1.0;

    std::vector<int> ring_class;                // 0 F, 1 F', -1 excluded
    std::vector<Eigen::MatrixXd> ring_legendre; // (L_int + 1) x (M + 1) per ring

    bool interface() const { return n_F > 0 && n_Fp > 0; }
    void build_mixed();
    void build_residual_tables();
    double residual(const ModalCoefficients& U, const ModalCoefficients& UN,
                    const BoundaryData& w, const Vec3& alpha_local, bool incident,
                    int& counted) const;
};

ScatterOperator::ScatterOperator(const WaveContext& ctx, const CapRegion& cap,
                                 const SurfaceGrid& grid, int L_max, const SolverOptions& opt)
    : impl_(std::make_unique<Impl>()) {
    ctx.validate();
    if (L_max < 0) throw std::invalid_argument("L_max must be >= 0");
    if (grid.exact_degree() < L_max) throw std::invalid_argument("grid does not resolve L_max");
    auto& s = *impl_;
    s.k = ctx.k;
    s.a = ctx.a;
    s.variant = ctx.bc_variant;
    s.cap = cap.canonical();
    s.frame = cap.frame();
    s.grid = grid;
    s.L_max = L_max;
    s.opt = opt;
    s.theta0 = s.cap.aperture;
    s.x0 = std::cos(s.theta0);
    s.M = L_max;

    for (int i = 0; i < grid.n_theta; ++i) (grid.cos_theta[i] > s.x0 ? s.n_F : s.n_Fp) += grid.n_phi;

    if (ctx.h.is_nodal() && ctx.h.per_node.size() != grid.size())
        throw std::invalid_argument("impedance must have one value per grid node");
    s.h = ctx.h.value;
    bool first = true;
    for (std::size_t i = 0; i < grid.size() && ctx.h.is_nodal(); ++i) {
        if (std::cos(grid.nodes[i].theta) > s.x0) continue;
        const cd v = ctx.h.per_node[i];
        if (first) {
            s.h = v;
            first = false;
        } else if (std::abs(v - s.h) > 1e-14 * std::max(1.0, std::abs(s.h))) {
            throw std::invalid_argument("impedance must be uniform on F'");
        }
    }

    if (s.variant == BcVariant::MixedDirichlet || s.n_Fp == 0) s.kind = Kind::Dirichlet;
    else if (s.n_F == 0) s.kind = Kind::Impedance;
    else s.kind = Kind::Mixed;

    // The edge expansion converges algebraically in N and needs L_int ~ N^2 to resolve it.
    s.N = opt.edge_basis_size > 0 ? opt.edge_basis_size : std::max(48, L_max + 26);
    const int l_auto = (static_cast<int>(std::ceil(1.75 * s.N * s.N)) + 99) / 100 * 100;
    s.L_int = opt.internal_degree > 0 ? opt.internal_degree : std::max(l_auto, 32 * (L_max + 1));
    if (s.L_int < 4 * L_max) throw std::invalid_argument("internal degree too small for L_max");

    const double ka = s.k * s.a;
    auto ld = hankel_log_derivative(s.L_int, ka);
    s.kappa.resize(s.L_int + 1);
    for (int l = 0; l <= s.L_int; ++l) s.kappa[l] = s.k * ld[l];
    s.hank = spherical_hankel_h1_array(L_max, ka);
    s.bessel = spherical_bessel_j_array(L_max, ka);

    // Incident defect u0_N - DtN(u0) per degree; negligible once |h_l| explodes.
    const auto hs = spherical_hankel_h1_array(s.L_int, ka);
    double hmin = std::abs(hs[0]);
    s.L_s = 0;
    for (int l = 0; l <= s.L_int; ++l) {
        const double v = std::abs(hs[l]);
        if (!std::isfinite(v) || v > 1e24 * hmin) break;
        hmin = std::min(hmin, v);
        s.L_s = l;
    }
    s.L_s = std::max(s.L_s, std::min(L_max, s.L_int));
    s.s0_radial.resize(s.L_s + 1);
    for (int l = 0; l <= s.L_s; ++l) s.s0_radial[l] = cd(0.0, -s.k) / (ka * ka * hs[l]);

    s.filt = spectral_filter(s.L_int);
    if (s.kind == Kind::Mixed) s.build_mixed();
    if (s.kind == Kind::Impedance) {
        double mx = 0.0, mn = std::numeric_limits<double>::infinity();
        for (int l = 0; l <= s.L_int; ++l) {
            const double v = std::abs(s.kappa[l] + s.h);
            mx = std::max(mx, v);
            mn = std::min(mn, v);
        }
        s.cond = mx / mn;
        if (mn < opt.rank_tol * mx) throw IllPosedError("impedance operator is singular");
    }
    s.build_residual_tables();
}

ScatterOperator::~ScatterOperator() = default;
ScatterOperator::ScatterOperator(ScatterOperator&&) noexcept = default;

void ScatterOperator::Impl::build_mixed() {
    int first = 0;
    const auto tw = tail_weights(L_int, theta0, first);
    std::vector<cd> kw(L_int + 1);
    for (int l = 0; l <= L_int; ++l) kw[l] = kappa[l] * (1.0 + (l >= first ? tw[l - first] : 0.0));

    const int Q = (L_int + M + N) / 2 + 4;
    const auto rule = gauss_sqrt_endpoint(Q, -1.0, x0);

    phi.assign(M + 1, Eigen::MatrixXd());
    lu.resize(M + 1);
    std::vector<double> conds(M + 1, 1.0);
    std::vector<double> smin(M + 1, 1.0);
    parallel_for(static_cast<std::size_t>(M + 1), opt.jobs, [&](std::size_t mi) {
        const int m = static_cast<int>(mi);
        const auto rec = edge_recurrence(N, m, x0);
        Eigen::MatrixXd B = rec.evaluate(N, rule.nodes);
        Eigen::MatrixXd P(Q, L_int + 1);
        for (int q = 0; q < Q; ++q) {
            const double x = rule.nodes[q];
            const double env = std::pow((1.0 - x) * (1.0 + x), 0.5 * m);
            B.col(q) *= env * rule.weights[q] * kTwoPi;
            const auto p = normalized_legendre(L_int, m, x);
            for (int l = 0; l <= L_int; ++l) P(q, l) = p[l];
        }
        Eigen::MatrixXd Phi = B * P;
        Eigen::VectorXd kr(L_int + 1), ki(L_int + 1);
        for (int l = 0; l <= L_int; ++l) {
            kr[l] = kw[l].real();
            ki[l] = kw[l].imag();
        }
        const Eigen::MatrixXd Gr = Phi * kr.asDiagonal() * Phi.transpose();
        const Eigen::MatrixXd Gi = Phi * ki.asDiagonal() * Phi.transpose();
        Eigen::MatrixXcd G(N, N);
        G.real() = Gr;
        G.imag() = Gi;
        G.diagonal().array() += kTwoPi * h;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(G);
        const auto sv = svd.singularValues();
        conds[mi] = sv[0] / sv[N - 1];
        smin[mi] = sv[N - 1] / sv[0];
        lu[mi] = G.partialPivLu();
        phi[mi] = std::move(Phi);
    });
    cond = *std::max_element(conds.begin(), conds.end());
    for (int m = 0; m <= M; ++m)
        if (smin[m] < opt.rank_tol)
            throw IllPosedError("edge system for azimuthal order " + std::to_string(m) +
                                " is numerically singular");
}

void ScatterOperator::Impl::build_residual_tables() {
    // Rings within guard_rings spacings of the cap edge are excluded from the residual.
    double spacing = 0.0;
    for (int i = 0; i + 1 < grid.n_theta; ++i)
        if (grid.theta[i] <= theta0 && theta0 < grid.theta[i + 1])
            spacing = grid.theta[i + 1] - grid.theta[i];
    ring_class.assign(grid.n_theta, 0);
    ring_legendre.assign(grid.n_theta, Eigen::MatrixXd());
    for (int i = 0; i < grid.n_theta; ++i) {
        ring_class[i] = grid.cos_theta[i] > x0 ? 0 : 1;
        if (interface() && std::abs(grid.theta[i] - theta0) < opt.guard_rings * spacing)
            ring_class[i] = -1;
        if (ring_class[i] < 0) continue;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(L_int + 1, M + 1);
        for (int m = 0; m <= M; ++m) {
            const auto p = normalized_legendre(L_int, m, grid.cos_theta[i]);
            for (int l = m; l <= L_int; ++l) T(l, m) = p[l] * filt[l];
        }
        ring_legendre[i] = std::move(T);
    }
}

double ScatterOperator::Impl::residual(const ModalCoefficients& U, const ModalCoefficients& UN,
                                       const BoundaryData& w, const Vec3& alpha_local,
                                       bool incident, int& counted) const {
    double num = 0.0, den = 0.0;
    counted = 0;
    const double ka = k * a;
    std::vector<cd> ru(2 * M + 1), rn(2 * M + 1);
    std::vector<char> active(2 * M + 1);
    for (int m = -M; m <= M; ++m)
        active[m + M] = !U.mode(m).isZero(0.0) || !UN.mode(m).isZero(0.0);
    for (int i = 0; i < grid.n_theta; ++i) {
        if (ring_class[i] < 0) continue;
        const auto& T = ring_legendre[i];
        for (int m = -M; m <= M; ++m) {
            ru[m + M] = rn[m + M] = 0.0;
            if (!active[m + M]) continue;
            const auto col = T.col(std::abs(m));
            const double sg = order_sign(m);
            ru[m + M] = sg * col.dot(U.mode(m));
            rn[m + M] = sg * col.dot(UN.mode(m));
        }
        for (int j = 0; j < grid.n_phi; ++j) {
            const auto node = grid.node(i, j);
            const double ph = grid.phi[j];
            cd u = 0.0, un = 0.0;
            const cd step = std::exp(cd(0.0, ph));
            cd e = std::exp(cd(0.0, -M * ph));
            for (int m = -M; m <= M; ++m) {
                u += ru[m + M] * e;
                un += rn[m + M] * e;
                e *= step;
            }
            const Vec3 n = grid.direction(node);
            const double c = alpha_local.dot(n);
            const cd u0 = incident ? std::exp(cd(0.0, ka * c)) : cd(0.0);
            const cd u0n = cd(0.0, k * c) * u0;
            cd r, rhs;
            if (ring_class[i] == 0) {
                const cd wv = w.at_node(node, grid.theta[i], ph);
                r = u - wv;
                rhs = wv - u0;
            } else if (variant == BcVariant::MixedDirichlet) {
                r = u;
                rhs = -u0;
            } else {
                r = un + h * u;
                rhs = -(u0n + h * u0);
            }
            const double wt = grid.nodes[node].weight;
            num += wt * std::norm(r);
            den += wt * std::norm(rhs);
            ++counted;
        }
    }
    if (num == 0.0) return 0.0;
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

ScatterResult ScatterOperator::solve(const WaveContext& ctx, const BoundaryData& w) const {
    return solve(ctx.alpha, ctx.incident, w);
}

ScatterResult ScatterOperator::solve(const Vec3& alpha, bool incident, const BoundaryData& w) const {
    const auto& s = *impl_;
    if (std::abs(alpha.norm() - 1.0) > 1e-12) throw std::invalid_argument("alpha must be a unit vector");
    const Vec3 al = s.frame.to_local(alpha);
    const auto& W = w.coefficients();
    if (!w.is_zero()) {
        if (W.M > s.M) throw std::invalid_argument("boundary data exceeds the solver's azimuthal range");
        if (s.n_F == 0) throw std::invalid_argument("boundary data given but the cap contains no grid nodes");
    }

    const int L = s.L_int, M = s.M;
    ModalCoefficients s0(L, M);
    Eigen::VectorXcd ang;
    if (incident) {
        ang = plane_wave_angular(al, s.L_s);
        for (int l = 0; l <= s.L_s; ++l)
            for (int m = -std::min(l, M); m <= std::min(l, M); ++m)
                s0.mode(m)[l] = s.s0_radial[l] * ang[flat_index(l, m)];
    }

    ModalCoefficients U(L, M);
    if (!w.is_zero())
        for (int m = -W.M; m <= W.M; ++m) U.mode(m).head(std::min(W.L, L) + 1) = W.mode(m).head(std::min(W.L, L) + 1);

    if (s.kind == Kind::Impedance) {
        for (int m = -M; m <= M; ++m)
            for (int l = std::abs(m); l <= L; ++l) U.mode(m)[l] = -s0.mode(m)[l] / (s.kappa[l] + s.h);
    } else if (s.kind == Kind::Mixed) {
        Eigen::VectorXcd f(L + 1);
        for (int m = -M; m <= M; ++m) {
            const auto& Phi = s.phi[std::abs(m)];
            const double sg = order_sign(m);
            for (int l = 0; l <= L; ++l) f[l] = (s.kappa[l] + s.h) * U.mode(m)[l] + s0.mode(m)[l];
            if (f.isZero(0.0)) continue;
            const Eigen::VectorXcd rhs = -sg * (Phi.cast<cd>() * f);
            const Eigen::VectorXcd cn = s.lu[std::abs(m)].solve(rhs);
            U.mode(m) += sg * (Phi.transpose().cast<cd>() * cn);
        }
    }

    ModalCoefficients UN(L, M);
    for (int m = -M; m <= M; ++m)
        for (int l = std::abs(m); l <= L; ++l) UN.mode(m)[l] = s.kappa[l] * U.mode(m)[l] + s0.mode(m)[l];

    ScatterResult out;
    auto& f = out.field;
    f.k = s.k;
    f.a = s.a;
    f.frame = s.frame;
    f.L_max = s.L_max;
    f.c = Eigen::VectorXcd::Zero(harmonic_count(s.L_max));
    for (int l = 0; l <= s.L_max; ++l)
        for (int m = -l; m <= l; ++m) {
            const cd u0 = incident ? s.bessel[l] * ang[flat_index(l, m)] : cd(0.0);
            f.c[flat_index(l, m)] = (U.mode(m)[l] - u0) / s.hank[l];
        }

    auto& r = out.report;
    r.method = s.kind == Kind::Dirichlet ? "dirichlet" : s.kind == Kind::Impedance ? "impedance" : "mixed";
    r.internal_degree = s.L_int;
    r.edge_basis_size = s.kind == Kind::Mixed ? s.N : 0;
    r.condition_estimate = s.cond;
    double cmax = 0.0, ctop = 0.0;
    for (int l = 0; l <= s.L_max; ++l)
        for (int m = -l; m <= l; ++m) {
            const double v = std::abs(f.c[flat_index(l, m)]);
            cmax = std::max(cmax, v);
            if (l == s.L_max) ctop = std::max(ctop, v);
        }
    r.truncation_tail = cmax > 0.0 ? ctop / cmax : 0.0;
    r.under_resolved = r.truncation_tail > 1e-6;
    r.relative_residual = s.residual(U, UN, w, al, incident, r.residual_nodes);

    out.trace.frame = s.frame;
    out.trace.L = L;
    out.trace.u = std::move(U);
    out.trace.u_n = std::move(UN);

    const double tol = s.opt.resid_tol > 0.0 ? s.opt.resid_tol : (s.interface() ? 1e-3 : 1e-6);
    if (!(r.relative_residual <= tol))
        throw NonConvergenceError("boundary residual " + std::to_string(r.relative_residual) +
                                      " exceeds tolerance " + std::to_string(tol),
                                  r);
    return out;
}

const Frame& ScatterOperator::frame() const { return impl_->frame; }
const CapRegion& ScatterOperator::cap() const { return impl_->cap; }
const SurfaceGrid& ScatterOperator::grid() const { return impl_->grid; }
int ScatterOperator::L_max() const { return impl_->L_max; }
int ScatterOperator::internal_degree() const { return impl_->L_int; }
double ScatterOperator::cap_cos() const { return impl_->x0; }
bool ScatterOperator::has_interface() const { return impl_->interface(); }
bool ScatterOperator::cap_has_nodes() const { return impl_->n_F > 0; }
double ScatterOperator::k() const { return impl_->k; }
double ScatterOperator::a() const { return impl_->a; }

ScatterResult solve_scatter(const WaveContext& ctx, const CapRegion& cap,
                            const Eigen::VectorXcd& w_nodes, const SurfaceGrid& grid, int L_max,
                            const SolverOptions& opt) {
    ScatterOperator op(ctx, cap, grid, L_max, opt);
    const auto w = BoundaryData::from_nodes(grid, cap, w_nodes);
    return op.solve(ctx, w);
}

}  // namespace cloak

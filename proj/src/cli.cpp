#include "cloaksynth/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cloaksynth/mie_oracle.hpp"
#include "cloaksynth/parallel.hpp"
#include "cloaksynth/solver.hpp"

namespace cloak {

namespace {

using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shortest text that parses back to the same double.
std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct KeyCtx {
    const std::string& source;
    int line;
    const std::string& key;
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(source, line, key, msg); }
};

double parse_double(const std::string& s, const KeyCtx& c) {
    double v = 0.0;
    const auto t = trim(s);
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
        c.fail("expected a real number, got '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const KeyCtx& c) {
    long long v = 0;
    const auto t = trim(s);
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
        c.fail("expected an integer, got '" + s + "'");
    return v;
}

std::vector<double> parse_doubles(const std::string& s, const KeyCtx& c) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) out.push_back(parse_double(tok, c));
    return out;
}

Vec3 parse_vec3(const std::string& s, const KeyCtx& c) {
    const auto v = parse_doubles(s, c);
    if (v.size() != 3) c.fail("expected three components");
    return {v[0], v[1], v[2]};
}

std::string list_text(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s;
}

std::string vec_text(const Vec3& v) { return list_text({v.x(), v.y(), v.z()}); }

// Keeps an already unit vector bit-for-bit so the canonical form is a fixed point.
Vec3 unit(const Vec3& v) {
    const double n = v.norm();
    if (std::abs(n - 1.0) <= 4e-16) return v;
    return v / n;
}

// --------------------------------------------------------------------------- output

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << content;
    f.close();
    if (!f) throw IoError("failed writing " + path.string());
}

json report_json(const std::string& label, const SolveReport& r) {
    json j;
    j["label"] = label;
    j["method"] = r.method;
    j["relative_residual"] = r.relative_residual;
    j["condition_estimate"] = r.condition_estimate;
    j["truncation_tail"] = r.truncation_tail;
    j["under_resolved"] = r.under_resolved;
    j["internal_degree"] = r.internal_degree;
    j["edge_basis_size"] = r.edge_basis_size;
    j["residual_nodes"] = r.residual_nodes;
    return j;
}

json frame_json(const Frame& f) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back({f.R(i, 0), f.R(i, 1), f.R(i, 2)});
    return rows;
}

// Shared summary skeleton; keys are always present, unknown values stay null.
struct Summary {
    json j;
    std::vector<std::string> artifacts;

    explicit Summary(const RunConfig& cfg) {
        j["mode"] = cfg.mode;
        j["status"] = "ok";
        j["error"] = nullptr;
        json echo;
        for (const auto& [k, v] : config_entries(cfg)) echo[k] = v;
        j["config_echo"] = echo;
        j["sigma_before"] = nullptr;
        j["sigma_after"] = nullptr;
        j["reduction_db"] = nullptr;
        j["control_norm"] = nullptr;
        j["lambda_used"] = nullptr;
        j["solve_reports"] = json::array();
        j["checks"] = {{"optical_residual", nullptr},
                       {"reciprocity_residual", nullptr},
                       {"oracle_rel_err", nullptr}};
        j["timing_seconds"] = nullptr;
        j["details"] = json::object();
    }
    void report(const std::string& label, const SolveReport& r) {
        j["solve_reports"].push_back(report_json(label, r));
    }
};

struct CheckTable {
    struct Row {
        std::string check, label;
        double value, tolerance;
        bool pass;
    };
    std::vector<Row> rows;

    bool add(const std::string& check, const std::string& label, double value, double tol,
             bool upper = true) {
        const bool ok = upper ? value <= tol : value >= tol;
        rows.push_back({check, label, value, tol, ok && std::isfinite(value)});
        return rows.back().pass;
    }
    bool all() const {
        return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.pass; });
    }
    std::string csv() const {
        std::string s = "check,case,value,tolerance,pass\n";
        for (const auto& r : rows)
            s += r.check + "," + r.label + "," + num(r.value) + "," + num(r.tolerance) + "," +
                 (r.pass ? "pass" : "FAIL") + "\n";
        return s;
    }
    json as_json() const {
        json a = json::array();
        for (const auto& r : rows)
            a.push_back({{"check", r.check}, {"case", r.label}, {"value", r.value},
                         {"tolerance", r.tolerance}, {"pass", r.pass}});
        return a;
    }
};

// --------------------------------------------------------------------------- physics helpers

struct Problem {
    WaveContext ctx;
    CapRegion cap;
    int L = 0;
    SurfaceGrid grid;
    std::unique_ptr<ScatterOperator> op;

    Problem(const WaveContext& c, const CapRegion& cp, int L_max, const SolverOptions& opt)
        : ctx(c), cap(cp), L(L_max), grid(build_grid(L_max)) {
        op = std::make_unique<ScatterOperator>(ctx, cap, grid, L, opt);
    }
};

// Lossless problems satisfy the optical theorem with equality.
bool lossless(const WaveContext& ctx) {
    return ctx.bc_variant == BcVariant::MixedDirichlet || ctx.h.value.imag() == 0.0;
}

double absorption_gap(const FarFieldPattern& p, const WaveContext& ctx) {
    // (4 pi / k) Im A(alpha) - sigma, nonnegative for absorbing boundaries.
    return 4.0 * std::numbers::pi / ctx.k * eval_pattern(p, ctx.alpha).imag() - sigma(p);
}

// max |c - c*| / max |c*| and the sigma relative error, against the closed-form sphere.
std::pair<double, double> oracle_errors(const ScatterResult& r, const MieSolution& mie,
                                        const Vec3& alpha_world) {
    const auto ref = mie_coefficients(mie, r.field.frame.to_local(alpha_world), r.field.L_max);
    const double scale = ref.c.cwiseAbs().maxCoeff();
    const double coef = (r.field.c - ref.c).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
    const double s = sigma(far_field(r.field));
    const double s_ref = sigma(far_field(ref));
    return {coef, std::abs(s - s_ref) / s_ref};
}

std::optional<MieSolution> oracle_for(const ScatterResult& r, const WaveContext& ctx) {
    if (r.report.method == "dirichlet") return MieSolution::soft(ctx.k, ctx.a);
    if (r.report.method == "impedance") return MieSolution::impedance(ctx.k, ctx.a, ctx.h.value);
    return std::nullopt;
}

const Vec3 kReciprocityBeta = Vec3(1.0, 1.0, 1.0).normalized();

int pattern_n_theta(const RunConfig& cfg, int L) {
    return cfg.pattern_n_theta > 0 ? cfg.pattern_n_theta : 2 * (L + 1);
}
int pattern_n_phi(const RunConfig& cfg, int L) {
    return cfg.pattern_n_phi > 0 ? cfg.pattern_n_phi : 4 * (L + 1);
}

void dump_pattern(const RunConfig& cfg, const FarFieldPattern& p, const std::string& stem,
                  Summary& sum) {
    const std::filesystem::path dir(cfg.output_dir);
    emit_pattern(p, pattern_n_theta(cfg, p.L_max), pattern_n_phi(cfg, p.L_max),
                 dir / (stem + "_pattern.csv"));
    emit_coefficients(p.a, p.L_max, dir / (stem + "_coefficients.csv"));
    sum.artifacts.push_back(stem + "_pattern.csv");
    sum.artifacts.push_back(stem + "_coefficients.csv");
}

// --------------------------------------------------------------------------- modes

int run_validate(const RunConfig& cfg, unsigned jobs, Summary& sum, std::ostream& log) {
    CheckTable t;
    double worst_optical = 0.0, worst_recip = 0.0, worst_oracle = 0.0;
    const Vec3 alpha = cfg.alpha;
    const double pi = std::numbers::pi;

    for (double ka : {0.5, 1.0, 2.0, pi}) {
        for (int variant = 0; variant < 2; ++variant) {
            WaveContext ctx;
            ctx.k = ka;
            ctx.a = 1.0;
            ctx.alpha = alpha;
            const bool soft = variant == 0;
            ctx.bc_variant = soft ? BcVariant::MixedDirichlet : BcVariant::MixedImpedance;
            ctx.h = soft ? cd(0.0) : cd(1.0);
            // Full cap for the soft sphere, no cap for the impedance sphere.
            const CapRegion cap(Vec3(0.0, 0.0, 1.0), soft ? pi - 1e-9 : 1e-9);
            const Problem pr(ctx, cap, default_L_max(ka), cfg.solver_options(jobs));
            const std::string label = std::string(soft ? "soft" : "impedance_h1") + "_ka" + num(ka);
            const auto r = pr.op->solve(ctx, BoundaryData());
            sum.report(label, r.report);
            const auto mie = soft ? MieSolution::soft(ka, 1.0) : MieSolution::impedance(ka, 1.0, 1.0);
            const auto [ce, se] = oracle_errors(r, mie, alpha);
            const auto p = far_field(r.field);
            const double opt_res = optical_theorem_residual(p, ctx);
            const double rec = reciprocity_residual(*pr.op, alpha, kReciprocityBeta);
            t.add("oracle_coefficients", label, ce, 1e-8);
            t.add("oracle_sigma", label, se, 1e-8);
            t.add("optical_theorem", label, opt_res, 1e-6);
            t.add("reciprocity", label, rec, 1e-8);
            worst_oracle = std::max({worst_oracle, ce, se});
            worst_optical = std::max(worst_optical, opt_res);
            worst_recip = std::max(worst_recip, rec);

            WaveContext lossy = ctx;
            lossy.bc_variant = BcVariant::MixedImpedance;
            lossy.h = cd(1.0, 1.0);
            const CapRegion empty(Vec3(0.0, 0.0, 1.0), 1e-9);
            if (!soft) {
                const Problem pl(lossy, empty, default_L_max(ka), cfg.solver_options(jobs));
                const auto rl = pl.op->solve(lossy, BoundaryData());
                sum.report("impedance_h1+1i_ka" + num(ka), rl.report);
                t.add("absorption_gap", "impedance_h1+1i_ka" + num(ka),
                      absorption_gap(far_field(rl.field), lossy), 0.0, false);
            }
        }
    }

    // Mixed cap from the configuration (defaults: the 30 degree cap, h = 1, ka = 2).
    WaveContext ctx = cfg.context();
    const Problem pr(ctx, cfg.cap(), cfg.resolved_L_max(), cfg.solver_options(jobs));
    const auto r = pr.op->solve(ctx, BoundaryData());
    sum.report("configured_case", r.report);
    const auto p = far_field(r.field);
    const double tol = pr.op->has_interface() ? 1e-4 : 1e-6;
    if (lossless(ctx)) {
        const double o = optical_theorem_residual(p, ctx);
        t.add("optical_theorem", "configured_case", o, tol);
        worst_optical = std::max(worst_optical, o);
    } else {
        t.add("absorption_gap", "configured_case", absorption_gap(p, ctx), 0.0, false);
    }
    const double rec = reciprocity_residual(*pr.op, ctx.alpha, kReciprocityBeta);
    t.add("reciprocity", "configured_case", rec, pr.op->has_interface() ? 1e-4 : 1e-8);
    worst_recip = std::max(worst_recip, rec);

    WaveContext lossy = ctx;
    lossy.bc_variant = BcVariant::MixedImpedance;
    lossy.h = cd(ctx.h.value.real(), std::max(1.0, ctx.h.value.imag()));
    const Problem pl(lossy, cfg.cap(), cfg.resolved_L_max(), cfg.solver_options(jobs));
    const auto rl = pl.op->solve(lossy, BoundaryData());
    sum.report("configured_case_absorbing", rl.report);
    t.add("absorption_gap", "configured_case_absorbing", absorption_gap(far_field(rl.field), lossy),
          0.0, false);

    write_file(std::filesystem::path(cfg.output_dir) / "validate.csv", t.csv());
    sum.artifacts.push_back("validate.csv");
    sum.j["sigma_before"] = sigma(p);
    sum.j["checks"]["optical_residual"] = worst_optical;
    sum.j["checks"]["reciprocity_residual"] = worst_recip;
    sum.j["checks"]["oracle_rel_err"] = worst_oracle;
    sum.j["details"]["table"] = t.as_json();
    sum.j["details"]["reciprocity_beta"] = {kReciprocityBeta.x(), kReciprocityBeta.y(), kReciprocityBeta.z()};
    dump_pattern(cfg, p, "configured", sum);

    for (const auto& row : t.rows)
        log << (row.pass ? "pass " : "FAIL ") << row.check << " " << row.label << " " << num(row.value)
            << " (tol " << num(row.tolerance) << ")\n";
    return t.all() ? 0 : static_cast<int>(ExitCode::Consistency);
}

// Optical/absorption, reciprocity and (where a closed form exists) oracle checks of A0.
bool check_uncontrolled(const Problem& pr, const ScatterResult& r, Summary& sum, CheckTable& t,
                        const std::string& prefix = "") {
    const auto p = far_field(r.field);
    const bool iface = pr.op->has_interface();
    json& checks = sum.j["checks"];
    bool ok = true;
    if (lossless(pr.ctx)) {
        const double o = optical_theorem_residual(p, pr.ctx);
        ok &= t.add("optical_theorem", prefix + "A0", o, iface ? 1e-4 : 1e-6);
        checks["optical_residual"] = o;
    } else {
        ok &= t.add("absorption_gap", prefix + "A0", absorption_gap(p, pr.ctx), 0.0, false);
    }
    const double rec = reciprocity_residual(*pr.op, pr.ctx.alpha, kReciprocityBeta);
    ok &= t.add("reciprocity", prefix + "A0", rec, iface ? 1e-4 : 1e-8);
    checks["reciprocity_residual"] = rec;
    if (const auto mie = oracle_for(r, pr.ctx)) {
        const auto [ce, se] = oracle_errors(r, *mie, pr.ctx.alpha);
        ok &= t.add("oracle_coefficients", prefix + "A0", ce, 1e-8);
        ok &= t.add("oracle_sigma", prefix + "A0", se, 1e-8);
        checks["oracle_rel_err"] = std::max(ce, se);
    }
    return ok;
}

int run_scatter(const RunConfig& cfg, unsigned jobs, Summary& sum, std::ostream& log) {
    const Problem pr(cfg.context(), cfg.cap(), cfg.resolved_L_max(), cfg.solver_options(jobs));
    const auto r = pr.op->solve(pr.ctx, BoundaryData());
    sum.report("A0", r.report);
    const auto p = far_field(r.field);
    sum.j["sigma_before"] = sigma(p);
    sum.j["sigma_after"] = sigma(p);
    sum.j["details"]["L_max"] = pr.L;
    sum.j["details"]["coefficient_frame"] = frame_json(p.frame);
    CheckTable t;
    const bool ok = check_uncontrolled(pr, r, sum, t);
    sum.j["details"]["table"] = t.as_json();
    dump_pattern(cfg, p, "A0", sum);
    log << "sigma = " << num(sigma(p)) << "  method " << r.report.method << "  residual "
        << num(r.report.relative_residual) << "\n";
    return ok ? 0 : static_cast<int>(ExitCode::Consistency);
}

struct CloakOutcome {
    SynthesisResult res;
    FarFieldPattern A0;
    double sigma_direct = 0.0;
    double resolve_rel_err = 0.0;
    std::vector<std::pair<double, SynthesisResult>> scan;
    bool ok = true;
};

CloakOutcome cloak_pipeline(const RunConfig& cfg, double k, unsigned jobs, Summary& sum,
                            CheckTable& t, const std::string& prefix) {
    RunConfig local = cfg;
    local.k = k;
    const Problem pr(local.context(), local.cap(), local.resolved_L_max(k), cfg.solver_options(jobs));
    CloakOutcome out;
    const auto r0 = pr.op->solve(pr.ctx, BoundaryData());
    sum.report(prefix + "A0", r0.report);
    out.ok &= check_uncontrolled(pr, r0, sum, t, prefix);
    out.A0 = far_field(r0.field);

    const ControlBasis basis(pr.cap, cfg.basis_P, cfg.basis_M);
    const auto C = assemble_control_operator(*pr.op, basis, jobs);
    for (int j = 0; j < basis.size(); ++j) {
        const auto it = basis.item(j);
        sum.report(prefix + "column_p" + std::to_string(it.p) + "_m" + std::to_string(it.m), C.reports[j]);
    }
    for (double lam : cfg.lambda_list) out.scan.emplace_back(lam, synthesize(out.A0, C.L, basis, lam));
    out.res = cfg.lambda_list.size() == 1 ? out.scan.front().second
                                          : synthesize_discrepancy(out.A0, C.L, basis, cfg.lambda_list);

    // Direct solve with the synthesized control; superposition must reproduce sigma_after.
    const auto rd = pr.op->solve(pr.ctx, out.res.w.boundary_data(pr.op->internal_degree()));
    sum.report(prefix + "controlled", rd.report);
    out.sigma_direct = sigma(far_field(rd.field));
    out.resolve_rel_err =
        std::abs(out.sigma_direct - out.res.sigma_after) / std::max(out.res.sigma_after, 1e-300);
    out.ok &= t.add("resolve_sigma", prefix + "controlled", out.resolve_rel_err, 1e-8);
    for (const auto& [lam, s] : out.scan)
        out.ok &= t.add("feasibility", prefix + "lambda_" + num(lam),
                        s.sigma_after - s.sigma_before * (1.0 + 1e-12), 0.0);
    return out;
}

std::string control_csv(const SynthesisResult& res) {
    std::string s = "j,p,m,re,im\n";
    for (int j = 0; j < res.w.basis.size(); ++j) {
        const auto it = res.w.basis.item(j);
        s += std::to_string(j) + "," + std::to_string(it.p) + "," + std::to_string(it.m) + "," +
             num(res.w.g[j].real()) + "," + num(res.w.g[j].imag()) + "\n";
    }
    return s;
}

int run_cloak(const RunConfig& cfg, unsigned jobs, Summary& sum, std::ostream& log) {
    CheckTable t;
    const auto o = cloak_pipeline(cfg, cfg.k, jobs, sum, t, "");
    const auto& res = o.res;
    sum.j["sigma_before"] = res.sigma_before;
    sum.j["sigma_after"] = res.sigma_after;
    sum.j["reduction_db"] = res.reduction_db;
    sum.j["control_norm"] = res.control_norm;
    sum.j["lambda_used"] = res.lambda_used;
    auto& d = sum.j["details"];
    d["L_max"] = cfg.resolved_L_max();
    d["coefficient_frame"] = frame_json(o.A0.frame);
    d["basis"] = {{"P", cfg.basis_P}, {"M", cfg.basis_M}, {"size", res.w.basis.size()}};
    d["objective_value"] = res.objective_value;
    d["ill_conditioned"] = res.ill_conditioned;
    d["sigma_direct_resolve"] = o.sigma_direct;
    d["resolve_rel_err"] = o.resolve_rel_err;
    json scan = json::array();
    std::string scan_csv = "lambda,sigma_after,control_norm,reduction_db\n";
    for (const auto& [lam, s] : o.scan) {
        scan.push_back({{"lambda", lam}, {"sigma_after", s.sigma_after},
                        {"control_norm", s.control_norm}, {"reduction_db", s.reduction_db}});
        scan_csv += num(lam) + "," + num(s.sigma_after) + "," + num(s.control_norm) + "," +
                    num(s.reduction_db) + "\n";
    }
    d["lambda_scan"] = scan;
    d["table"] = t.as_json();

    const std::filesystem::path dir(cfg.output_dir);
    write_file(dir / "lambda_scan.csv", scan_csv);
    write_file(dir / "control_coefficients.csv", control_csv(res));
    sum.artifacts.push_back("lambda_scan.csv");
    sum.artifacts.push_back("control_coefficients.csv");
    dump_pattern(cfg, o.A0, "A0", sum);
    dump_pattern(cfg, res.controlled, "controlled", sum);

    log << "sigma_before = " << num(res.sigma_before) << "  sigma_after = " << num(res.sigma_after)
        << "  reduction = " << num(res.reduction_db) << " dB  lambda = " << num(res.lambda_used)
        << "  |w| = " << num(res.control_norm) << "\n";
    return o.ok ? 0 : static_cast<int>(ExitCode::Consistency);
}

int run_sweep(const RunConfig& cfg, unsigned jobs, Summary& sum, std::ostream& log) {
    const std::size_t n = cfg.sweep_k.size();
    std::vector<CloakOutcome> outs(n);
    std::vector<Summary> subs;
    std::vector<CheckTable> tables(n);
    for (std::size_t i = 0; i < n; ++i) subs.emplace_back(cfg);
    // Runs are independent; each uses a single thread inside.
    parallel_for(n, jobs, [&](std::size_t i) {
        outs[i] = cloak_pipeline(cfg, cfg.sweep_k[i], 1, subs[i], tables[i],
                                 "k" + std::to_string(i) + "_");
    });

    std::string csv = "k,ka,L_max,sigma_before,sigma_after,reduction_db,control_norm,lambda_used\n";
    json runs = json::array();
    bool ok = true;
    const std::filesystem::path dir(cfg.output_dir);
    for (std::size_t i = 0; i < n; ++i) {
        const double k = cfg.sweep_k[i];
        const auto& r = outs[i].res;
        for (auto& rep : subs[i].j["solve_reports"]) sum.j["solve_reports"].push_back(rep);
        ok &= outs[i].ok;
        const int L = cfg.resolved_L_max(k);
        csv += num(k) + "," + num(k * cfg.a) + "," + std::to_string(L) + "," + num(r.sigma_before) +
               "," + num(r.sigma_after) + "," + num(r.reduction_db) + "," + num(r.control_norm) + "," +
               num(r.lambda_used) + "\n";
        const std::string stem = "k" + std::to_string(i);
        write_file(dir / (stem + "_control_coefficients.csv"), control_csv(r));
        emit_coefficients(outs[i].A0.a, outs[i].A0.L_max, dir / (stem + "_A0_coefficients.csv"));
        emit_coefficients(r.controlled.a, r.controlled.L_max, dir / (stem + "_controlled_coefficients.csv"));
        sum.artifacts.push_back(stem + "_control_coefficients.csv");
        sum.artifacts.push_back(stem + "_A0_coefficients.csv");
        sum.artifacts.push_back(stem + "_controlled_coefficients.csv");
        runs.push_back({{"k", k}, {"L_max", L}, {"sigma_before", r.sigma_before},
                        {"sigma_after", r.sigma_after}, {"reduction_db", r.reduction_db},
                        {"control_norm", r.control_norm}, {"lambda_used", r.lambda_used},
                        {"checks", subs[i].j["checks"]}, {"table", tables[i].as_json()},
                        {"resolve_rel_err", outs[i].resolve_rel_err}});
        log << "k = " << num(k) << "  sigma " << num(r.sigma_before) << " -> " << num(r.sigma_after)
            << "  (" << num(r.reduction_db) << " dB)\n";
    }
    write_file(dir / "sweep.csv", csv);
    sum.artifacts.push_back("sweep.csv");
    sum.j["details"]["runs"] = runs;
    return ok ? 0 : static_cast<int>(ExitCode::Consistency);
}

int run_density(const RunConfig& cfg, unsigned jobs, Summary& sum, std::ostream& log) {
    const Problem pr(cfg.context(), cfg.cap(), cfg.resolved_L_max(), cfg.solver_options(jobs));
    const auto target = random_pattern(cfg.k, pr.L, cfg.target_band, cfg.target_seed, pr.op->frame());
    std::vector<SolveReport> reps;
    const auto res = density_experiment(*pr.op, target, cfg.density_sizes, jobs, &reps);
    const ControlBasis big(pr.cap, cfg.density_sizes.back().first, cfg.density_sizes.back().second);
    for (int j = 0; j < big.size(); ++j) {
        const auto it = big.item(j);
        sum.report("column_p" + std::to_string(it.p) + "_m" + std::to_string(it.m), reps[j]);
    }
    CheckTable t;
    std::string csv = "P,M,basis_size,residual\n";
    json rows = json::array();
    bool ok = true;
    for (std::size_t i = 0; i < res.size(); ++i) {
        const auto [P, M] = cfg.density_sizes[i];
        csv += std::to_string(P) + "," + std::to_string(M) + "," + std::to_string(P * (2 * M + 1)) +
               "," + num(res[i]) + "\n";
        rows.push_back({{"P", P}, {"M", M}, {"residual", res[i]}});
        if (i > 0) ok &= t.add("nonincreasing", std::to_string(P) + "x" + std::to_string(M),
                               res[i] - res[i - 1], 1e-10);
        log << "(" << P << "," << M << ")  residual " << num(res[i]) << "\n";
    }
    const std::filesystem::path dir(cfg.output_dir);
    write_file(dir / "density.csv", csv);
    emit_coefficients(target.a, target.L_max, dir / "target_coefficients.csv");
    sum.artifacts.push_back("density.csv");
    sum.artifacts.push_back("target_coefficients.csv");
    sum.j["details"]["L_max"] = pr.L;
    sum.j["details"]["target_norm"] = target.a.norm();
    sum.j["details"]["residuals"] = rows;
    sum.j["details"]["coefficient_frame"] = frame_json(pr.op->frame());
    sum.j["details"]["table"] = t.as_json();
    return ok ? 0 : static_cast<int>(ExitCode::Consistency);
}

}  // namespace

// --------------------------------------------------------------------------- config

ConfigError::ConfigError(const std::string& src, int ln, const std::string& k, const std::string& msg)
    : std::runtime_error(src + (ln > 0 ? ":" + std::to_string(ln) : std::string()) +
                         (k.empty() ? std::string() : " [" + k + "]") + ": " + msg),
      source(src),
      line(ln),
      key(k) {}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "mode",        "k",           "a",             "alpha",           "h_real",
        "h_imag",      "bc_variant",  "cap_axis",      "cap_aperture_deg", "L_max",
        "basis_P",     "basis_M",     "lambda_list",   "target_seed",     "target_band",
        "density_sizes", "sweep_k",   "pattern_n_theta", "pattern_n_phi", "record_timing",
        "output_dir",  "resid_tol",   "edge_basis_size", "internal_degree"};
    return keys;
}

const std::vector<std::string>& run_modes() {
    static const std::vector<std::string> modes{"validate", "scatter", "cloak", "sweep", "density"};
    return modes;
}

int RunConfig::resolved_L_max() const { return resolved_L_max(k); }

int RunConfig::resolved_L_max(double k_value) const {
    return L_max > 0 ? L_max : default_L_max(k_value * a);
}

WaveContext RunConfig::context() const {
    WaveContext c;
    c.k = k;
    c.a = a;
    c.alpha = alpha;
    c.h = cd(h_real, h_imag);
    c.bc_variant = bc_variant;
    return c;
}

SolverOptions RunConfig::solver_options(unsigned jobs) const {
    SolverOptions o;
    o.resid_tol = resid_tol;
    o.edge_basis_size = edge_basis_size;
    o.internal_degree = internal_degree;
    o.jobs = jobs;
    return o;
}

CapRegion RunConfig::cap() const {
    // 0 and 180 degrees become the empty and full cap; the solver dispatches on grid membership.
    const double pi = std::numbers::pi;
    const double ap = std::clamp(cap_aperture_deg * pi / 180.0, 1e-9, pi - 1e-9);
    return CapRegion(cap_axis, ap);
}

void set_config_value(RunConfig& cfg, const std::string& key_in, const std::string& value,
                      const std::string& source, int line) {
    std::string key = key_in;
    std::replace(key.begin(), key.end(), '-', '_');
    const KeyCtx c{source, line, key};
    const std::string v = trim(value);
    auto nonneg_int = [&](int lo) {
        const long long x = parse_int(v, c);
        if (x < lo || x > 100000) c.fail("out of range");
        return static_cast<int>(x);
    };
    if (key == "mode") {
        if (std::find(run_modes().begin(), run_modes().end(), v) == run_modes().end())
            c.fail("unknown mode '" + v + "'");
        cfg.mode = v;
    } else if (key == "k") {
        cfg.k = parse_double(v, c);
        if (!(cfg.k > 0.0)) c.fail("k must be positive");
    } else if (key == "a") {
        cfg.a = parse_double(v, c);
        if (!(cfg.a > 0.0)) c.fail("a must be positive");
    } else if (key == "alpha") {
        cfg.alpha = parse_vec3(v, c);
        if (!(cfg.alpha.norm() > 0.0)) c.fail("alpha must be nonzero");
        cfg.alpha = unit(cfg.alpha);
    } else if (key == "h_real") {
        cfg.h_real = parse_double(v, c);
    } else if (key == "h_imag") {
        const double x = parse_double(v, c);
        if (x < 0.0) c.fail("Im h must be >= 0");
        cfg.h_imag = x;
    } else if (key == "bc_variant") {
        if (v == "A" || v == "impedance") cfg.bc_variant = BcVariant::MixedImpedance;
        else if (v == "B" || v == "dirichlet") cfg.bc_variant = BcVariant::MixedDirichlet;
        else c.fail("expected A or B");
    } else if (key == "cap_axis") {
        cfg.cap_axis = parse_vec3(v, c);
        if (!(cfg.cap_axis.norm() > 0.0)) c.fail("cap_axis must be nonzero");
        cfg.cap_axis = unit(cfg.cap_axis);
    } else if (key == "cap_aperture_deg") {
        const double x = parse_double(v, c);
        if (x < 0.0 || x > 180.0) c.fail("aperture must be within [0, 180] degrees");
        cfg.cap_aperture_deg = x;
    } else if (key == "L_max") {
        cfg.L_max = v == "auto" ? 0 : nonneg_int(1);
    } else if (key == "basis_P") {
        cfg.basis_P = nonneg_int(0);
    } else if (key == "basis_M") {
        cfg.basis_M = nonneg_int(0);
    } else if (key == "lambda_list") {
        auto l = parse_doubles(v, c);
        if (l.empty()) c.fail("need at least one lambda");
        for (double x : l)
            if (x < 0.0) c.fail("lambda must be >= 0");
        cfg.lambda_list = std::move(l);
    } else if (key == "target_seed") {
        unsigned long long x = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size())
            c.fail("expected a non-negative integer");
        cfg.target_seed = x;
    } else if (key == "target_band") {
        cfg.target_band = nonneg_int(0);
    } else if (key == "density_sizes") {
        std::vector<BasisSize> sizes;
        for (const auto& tok : split_list(v)) {
            const auto x = tok.find('x');
            if (x == std::string::npos) c.fail("expected PxM entries, got '" + tok + "'");
            const long long P = parse_int(tok.substr(0, x), c), M = parse_int(tok.substr(x + 1), c);
            if (P < 1 || M < 0) c.fail("basis sizes need P >= 1, M >= 0");
            if (!sizes.empty() && (P < sizes.back().first || M < sizes.back().second))
                c.fail("basis sizes must be nested");
            sizes.emplace_back(static_cast<int>(P), static_cast<int>(M));
        }
        if (sizes.empty()) c.fail("need at least one basis size");
        cfg.density_sizes = std::move(sizes);
    } else if (key == "sweep_k") {
        auto l = parse_doubles(v, c);
        if (l.empty()) c.fail("need at least one k");
        for (double x : l)
            if (!(x > 0.0)) c.fail("k must be positive");
        cfg.sweep_k = std::move(l);
    } else if (key == "pattern_n_theta") {
        cfg.pattern_n_theta = nonneg_int(0);
    } else if (key == "pattern_n_phi") {
        cfg.pattern_n_phi = nonneg_int(0);
    } else if (key == "record_timing") {
        if (v == "true" || v == "1") cfg.record_timing = true;
        else if (v == "false" || v == "0") cfg.record_timing = false;
        else c.fail("expected true or false");
    } else if (key == "output_dir") {
        if (v.empty()) c.fail("output_dir is empty");
        cfg.output_dir = v;
    } else if (key == "resid_tol") {
        const double x = parse_double(v, c);
        if (x < 0.0) c.fail("resid_tol must be >= 0");
        cfg.resid_tol = x;
    } else if (key == "edge_basis_size") {
        cfg.edge_basis_size = nonneg_int(0);
    } else if (key == "internal_degree") {
        cfg.internal_degree = nonneg_int(0);
    } else {
        c.fail("unknown key");
    }
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(source, line, "", "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError(source, line, "", "missing key");
        set_config_value(cfg, key, s.substr(eq + 1), source, line);
    }
    finalize_config(cfg, source);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(path.string(), 0, "", "cannot read config file");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path.string());
}

void finalize_config(RunConfig& cfg, const std::string& src) {
    if (cfg.h_imag < 0.0) throw ConfigError(src, 0, "h_imag", "Im h must be >= 0");
    if (cfg.basis_P * (2 * cfg.basis_M + 1) == 0 && (cfg.mode == "cloak" || cfg.mode == "sweep"))
        throw ConfigError(src, 0, "basis_P", "cloak needs a nonempty control basis");
    cfg.alpha = unit(cfg.alpha);
    cfg.cap_axis = unit(cfg.cap_axis);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
    std::string sizes;
    for (std::size_t i = 0; i < cfg.density_sizes.size(); ++i)
        sizes += (i ? ", " : "") + std::to_string(cfg.density_sizes[i].first) + "x" +
                 std::to_string(cfg.density_sizes[i].second);
    return {
        {"mode", cfg.mode},
        {"k", num(cfg.k)},
        {"a", num(cfg.a)},
        {"alpha", vec_text(cfg.alpha)},
        {"h_real", num(cfg.h_real)},
        {"h_imag", num(cfg.h_imag)},
        {"bc_variant", cfg.bc_variant == BcVariant::MixedImpedance ? "A" : "B"},
        {"cap_axis", vec_text(cfg.cap_axis)},
        {"cap_aperture_deg", num(cfg.cap_aperture_deg)},
        {"L_max", cfg.L_max > 0 ? std::to_string(cfg.L_max) : "auto"},
        {"basis_P", std::to_string(cfg.basis_P)},
        {"basis_M", std::to_string(cfg.basis_M)},
        {"lambda_list", list_text(cfg.lambda_list)},
        {"target_seed", std::to_string(cfg.target_seed)},
        {"target_band", std::to_string(cfg.target_band)},
        {"density_sizes", sizes},
        {"sweep_k", list_text(cfg.sweep_k)},
        {"pattern_n_theta", std::to_string(cfg.pattern_n_theta)},
        {"pattern_n_phi", std::to_string(cfg.pattern_n_phi)},
        {"record_timing", cfg.record_timing ? "true" : "false"},
        {"output_dir", cfg.output_dir},
        {"resid_tol", num(cfg.resid_tol)},
        {"edge_basis_size", std::to_string(cfg.edge_basis_size)},
        {"internal_degree", std::to_string(cfg.internal_degree)},
    };
}

std::string to_text(const RunConfig& cfg) {
    std::string s;
    for (const auto& [k, v] : config_entries(cfg)) s += k + " = " + v + "\n";
    return s;
}

// --------------------------------------------------------------------------- artifacts

void emit_pattern(const FarFieldPattern& p, int n_theta, int n_phi, const std::filesystem::path& path) {
    const auto g = build_grid(n_theta, n_phi, p.L_max);
    std::string s = "theta_rad,phi_rad,re_A,im_A,abs2_A\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        const cd A = eval_pattern(p, g.direction(i));
        s += num(g.nodes[i].theta) + "," + num(g.nodes[i].phi) + "," + num(A.real()) + "," +
             num(A.imag()) + "," + num(std::norm(A)) + "\n";
    }
    write_file(path, s);
}

void emit_coefficients(const Eigen::VectorXcd& c, int L_max, const std::filesystem::path& path) {
    std::string s = "l,m,re,im\n";
    for (int l = 0; l <= L_max; ++l)
        for (int m = -l; m <= l; ++m) {
            const cd v = c[flat_index(l, m)];
            s += std::to_string(l) + "," + std::to_string(m) + "," + num(v.real()) + "," + num(v.imag()) + "\n";
        }
    write_file(path, s);
}

// --------------------------------------------------------------------------- driver

int run(const RunConfig& cfg, unsigned jobs, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    Summary sum(cfg);
    int code = 0;
    const std::filesystem::path dir(cfg.output_dir);
    try {
        std::filesystem::create_directories(dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Io);
    }
    auto fail = [&](ExitCode c, const char* status, const std::string& msg) {
        code = static_cast<int>(c);
        sum.j["status"] = status;
        sum.j["error"] = msg;
        std::cerr << "error: " << msg << "\n";
    };
    try {
        if (cfg.mode == "validate") code = run_validate(cfg, jobs, sum, log);
        else if (cfg.mode == "scatter") code = run_scatter(cfg, jobs, sum, log);
        else if (cfg.mode == "cloak") code = run_cloak(cfg, jobs, sum, log);
        else if (cfg.mode == "sweep") code = run_sweep(cfg, jobs, sum, log);
        else if (cfg.mode == "density") code = run_density(cfg, jobs, sum, log);
        else throw ConfigError("<config>", 0, "mode", "unknown mode '" + cfg.mode + "'");
        if (code == static_cast<int>(ExitCode::Consistency)) sum.j["status"] = "consistency_failure";
    } catch (const NonConvergenceError& e) {
        sum.report("failed", e.report);
        fail(ExitCode::Solver, "solver_failure", e.what());
    } catch (const IllPosedError& e) {
        fail(ExitCode::Solver, "solver_failure", e.what());
    } catch (const IoError& e) {
        fail(ExitCode::Io, "io_error", e.what());
    } catch (const ConfigError& e) {
        fail(ExitCode::Config, "config_error", e.what());
    } catch (const std::invalid_argument& e) {
        fail(ExitCode::Config, "config_error", e.what());
    } catch (const std::exception& e) {
        fail(ExitCode::Solver, "solver_failure", e.what());
    }
    if (cfg.record_timing)
        sum.j["timing_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sum.j["artifacts"] = sum.artifacts;
    try {
        write_file(dir / "summary.json", sum.j.dump(2) + "\n");
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Io);
    }
    return code;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"cloaksynth: boundary-control cloaking of a sphere"};
    std::string mode, config_path;
    unsigned jobs = default_jobs();
    app.add_option("mode", mode, "validate | scatter | cloak | sweep | density")->required();
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    app.allow_extras();
    app.footer("Any config key can be overridden with --key value. Angles are in degrees.");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ExitCode::Config);
    }

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        const auto extras = app.remaining();
        for (std::size_t i = 0; i < extras.size(); ++i) {
            std::string tok = extras[i];
            if (tok.rfind("--", 0) != 0)
                throw ConfigError("<command line>", 0, tok, "expected --key value");
            tok = tok.substr(2);
            const auto eq = tok.find('=');
            if (eq != std::string::npos) {
                set_config_value(cfg, tok.substr(0, eq), tok.substr(eq + 1));
            } else {
                if (i + 1 >= extras.size()) throw ConfigError("<command line>", 0, tok, "missing value");
                set_config_value(cfg, tok, extras[++i]);
            }
        }
        set_config_value(cfg, "mode", mode);
        finalize_config(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Config);
    }
    return run(cfg, jobs, std::cout);
}

}  // namespace cloak

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cloaksynth/control.hpp"
#include "cloaksynth/farfield.hpp"
#include "cloaksynth/incident.hpp"

namespace cloak {

enum class ExitCode : int { Ok = 0, Config = 2, Solver = 3, Consistency = 4, Io = 5 };

// Parse or validation failure, addressed by line (0 when from the command line) and key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& key, const std::string& msg);
    std::string source;
    int line = 0;
    std::string key;
};

// Angles are degrees here; everything past load_config works in radians.
struct RunConfig {
    std::string mode = "scatter";
    double k = 2.0;
    double a = 1.0;
    Vec3 alpha{0.0, 0.0, 1.0};
    double h_real = 1.0;
    double h_imag = 0.0;
    BcVariant bc_variant = BcVariant::MixedImpedance;
    Vec3 cap_axis{0.0, 0.0, 1.0};
    double cap_aperture_deg = 30.0;
    int L_max = 0;  // 0 is "auto": ceil(ka) + 20
    int basis_P = 6;
    int basis_M = 4;
    std::vector<double> lambda_list{1e-6};
    unsigned long long target_seed = 12345;
    int target_band = 6;
    std::vector<BasisSize> density_sizes{{2, 1}, {4, 2}, {6, 4}, {8, 6}};
    std::vector<double> sweep_k{1.0, 2.0, 3.0};
    int pattern_n_theta = 0;  // 0 picks a grid that integrates |A|^2 exactly
    int pattern_n_phi = 0;
    bool record_timing = true;
    std::string output_dir = "out";
    // Solver overrides, 0 keeps the automatic choice.
    double resid_tol = 0.0;
    int edge_basis_size = 0;
    int internal_degree = 0;

    int resolved_L_max() const;
    int resolved_L_max(double k_value) const;
    WaveContext context() const;
    CapRegion cap() const;
    SolverOptions solver_options(unsigned jobs) const;
};

const std::vector<std::string>& config_keys();
const std::vector<std::string>& run_modes();

// Sets one key from its text form. Throws ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& source = "<command line>", int line = 0);
// Flat "key = value" text, '#' starts a comment.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
// Cross-field checks and normalisation (alpha, cap_axis). Throws ConfigError.
void finalize_config(RunConfig& cfg, const std::string& source = "<config>");
// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const RunConfig& cfg);
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

// (theta, phi, Re A, Im A, |A|^2) rows on a Gauss-Legendre x uniform grid in world angles.
void emit_pattern(const FarFieldPattern& p, int n_theta, int n_phi,
                  const std::filesystem::path& path);
// (l, m, re, im) rows of a cap-frame coefficient vector.
void emit_coefficients(const Eigen::VectorXcd& c, int L_max, const std::filesystem::path& path);

// Runs one mode and writes artifacts under cfg.output_dir. Returns the process exit code.
int run(const RunConfig& cfg, unsigned jobs, std::ostream& log);

// Entry point used by the cloaksynth executable.
int cli_main(int argc, char** argv);

}  // namespace cloak

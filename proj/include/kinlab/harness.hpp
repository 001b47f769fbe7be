// Experiment orchestration: configuration ingestion, the particle-vs-solver
// convergence study, the noise-field decay study, the identity-residual
// refinement study, slope fitting with confidence intervals, deterministic
// report files, and the command-line interface.

#ifndef KINLAB_HARNESS_HPP
#define KINLAB_HARNESS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kinlab/convolution_lab.hpp"
#include "kinlab/frequency_grid.hpp"
#include "kinlab/gaussian_calculus.hpp"
#include "kinlab/kinetic.hpp"
#include "kinlab/particles.hpp"

namespace kinlab {

inline constexpr const char* kCodeVersion = "kinlab 1.0.0";

// Full description of one experiment run. Everything that can change a
// result lives here; out_dir and threads are execution details and are
// excluded from the config hash.
struct ExperimentConfig {
    std::string experiment = "lln";  // lln, zdecay, mild-residual, semigroup-verify, solver-verify
    std::vector<std::size_t> n_ladder = {64, 128, 256, 512, 1024, 2048, 4096};
    std::size_t replicas = 20;
    SimConfig sim;  // template: N and seed are assigned per ladder point and replica
    SobolevOrder order{6.0, 1};

    // frequency grid the norms are evaluated on
    double xi_max = 32.0, eta_max = 32.0;
    std::size_t n_xi = 257, n_eta = 257;

    // deterministic reference solve (lln only); 128 nodes per axis keep the
    // spectral tail of the default initial data below 1e-20 on [-4pi, 4pi]
    double solver_dt = 2e-3;
    double solver_box = 4.0 * M_PI;
    std::size_t solver_n = 128;
    bool solver_write_nu_hat = false;

    // identity-residual study (mild-residual only)
    std::vector<double> dt_ladder = {4e-3, 2e-3, 1e-3};
    double residual_time = 0.5;
    GaussianBump test_function{1.0, 0.0, 0.0, 0.75, 0.75};

    std::string out_dir = "out";
    std::uint64_t master_seed = 1;
    unsigned threads = 0;  // 0 = hardware concurrency

    void validate() const;
    GridPtr make_grid() const;

    // per-experiment defaults; the decay study uses the particle ladder
    // {64, 256, 1024, 4096}, 128 steps, and an eta-refined grid on [-16, 16]^2
    static ExperimentConfig defaults(const std::string& experiment);
};

// JSON round trip (nested tables, all keys optional over the experiment's
// defaults) and the FNV-1a hash of the canonical serialization
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci = 0.0;  // 95% half-width on the slope
};

// ordinary least squares of log(value) on log(n); needs >= 3 distinct n and
// positive data
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& pairs);

// Spearman rank correlation, the independence sanity check applied to
// replica error sequences
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

struct ConvergenceReport {
    std::string experiment;
    std::uint64_t config_hash = 0;
    std::uint64_t master_seed = 0;
    std::string code_version = kCodeVersion;
    std::vector<std::size_t> n_values;
    std::vector<std::vector<double>> errors;        // [ladder point][replica]
    std::vector<std::vector<std::uint64_t>> seeds;  // same layout
    std::vector<double> means, stderrs;
    SlopeFit fit;
};

// Reference transforms for the convergence study: the deterministic solver
// run at solver_dt/2, with the max dual-norm gap to the solver_dt run as the
// self-convergence (bias) estimate.
struct ReferenceSolution {
    std::vector<double> times;
    std::vector<SpectralField> nu_hats;
    double bias_estimate = 0.0;
};
ReferenceSolution solve_reference(const ExperimentConfig& cfg);

// dual-norm error of a stored path against reference transforms, one value
// per recorded snapshot
std::vector<double> snapshot_errors(const EnsemblePath& path,
                                    const std::vector<SpectralField>& refs,
                                    const SobolevOrder& order);

// The convergence study: reference solve, then per (N, replica) the max
// snapshot error, aggregated and fitted. Throws ContractViolation when the
// solver bias estimate exceeds 10% of the smallest mean error.
ConvergenceReport run_lln(const ExperimentConfig& cfg);

// The noise-field decay study: per (N, replica) the sup-snapshot dual norm
// of the assembled stochastic convolution field, aggregated and fitted.
ConvergenceReport run_zdecay(const ExperimentConfig& cfg);

struct ResidualReport {
    std::string experiment;
    std::uint64_t config_hash = 0;
    std::uint64_t master_seed = 0;
    std::string code_version = kCodeVersion;
    std::vector<double> dts;  // descending, coarse to fine
    std::vector<MildIdentityTerms> terms;
    std::vector<double> residuals;
    bool monotone = false;
    double finest_over_coarsest = 0.0;
};

// The identity-residual refinement study: one Brownian path drawn at the
// finest step, coarsened by exact aggregation, and the identity residual
// evaluated per refinement level.
ResidualReport run_mild_residual(const ExperimentConfig& cfg);

// report.json plus replica_errors.csv and aggregates.csv (residuals.csv for
// the residual study), all written atomically and byte-stable under reruns
void write_report(const ConvergenceReport& report, const std::string& dir);
void write_residual_report(const ResidualReport& report, const std::string& dir);

struct PropertyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Fast self-contained property sweep behind the `verify` subcommand: kernel
// identities, norm oracles, semigroup law and Monte Carlo agreement, solver
// pushforward, particle determinism, noise-field basics, and the
// transport-only identity residual. The kernel time-regularity probe is
// reported with its measured violation rate but is not a gate; see README.
std::vector<PropertyCheck> run_verify_suite(std::uint64_t seed);

// subcommands simulate | solve | norm | lln | zdecay | mild-residual |
// verify; exit 0 on success, 1 on validation failure, 2 on a numerical
// contract breach
int cli_main(int argc, char** argv);

}  // namespace kinlab

#endif

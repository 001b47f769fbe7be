// Deterministic solver for the kinetic mean-field PDE in mild form: an
// exponential midpoint integrator built on the exact forward flow, the
// mean-field convolution term, a direct quadrature of characteristic
// functions for cross-convention comparisons, and a Picard fixed-point
// iteration used as an independent discretization of the same equation.

#ifndef KINLAB_MILDSOLVER_HPP
#define KINLAB_MILDSOLVER_HPP

#include <optional>
#include <vector>

#include "kinlab/frequency_grid.hpp"
#include "kinlab/gaussian_calculus.hpp"
#include "kinlab/interaction.hpp"
#include "kinlab/semigroup.hpp"

namespace kinlab {

// Samples a product mixture on the grid and normalizes the cell sum to exact
// unit mass (the discrete definition of the initial probability density).
RealField discretize_density(const ProductMixtureDensity& density, const PhysicalGrid& grid);

// Characteristic function of a grid density by direct (non-periodic)
// quadrature with the measure-side phase convention, so grid densities and
// particle measures are compared under one convention.
SpectralField density_char(const RealField& nu, const GridPtr& grid);

// Mean interaction force field (gamma * nu)(x, v) by periodic spectral
// convolution. sine_mode kernels require the box period to be a multiple of
// 2 pi; generic kernels must have support_radius <= half the box.
RealField meanfield_term(const RealField& nu, const InteractionKernel& kernel);

// Exact two-mode evaluation for sine_mode kernels, used as a cross-check:
// (gamma * nu)(x) = -K (sin x int cos y dnu - cos x int sin y dnu).
RealField meanfield_term_sine_exact(const RealField& nu, const InteractionKernel& kernel);

// One exponential midpoint step of the mild formulation. Mass is conserved
// structurally: the flow fixes the zero mode and the divergence term has an
// exactly zero cell sum. sigma = 0 uses the pure transport flow.
RealField step_mild(const RealField& nu, double dt, const InteractionKernel& kernel,
                    double sigma);

struct DensitySnapshot {
    double t = 0.0;
    RealField density;
    std::optional<SpectralField> nu_hat;
};

struct SolverOptions {
    double dt = 2e-3;
    double sigma = std::sqrt(2.0);
    std::vector<double> snapshot_times;  // defaults to uniform over [0, T]
    std::size_t snapshot_count = 33;     // used when snapshot_times is empty
    GridPtr freq_grid;                   // record nu_hat when set
    double boundary_mass_limit = 1e-6;   // ContractViolation above this
    bool record_density = true;
};

struct MildRun {
    std::vector<DensitySnapshot> snapshots;
    SolverOptions options;
    bool positivity_flagged = false;  // diagnostic: values below -1e-8 * max seen

    const DensitySnapshot& at_time(double t) const;
};

// Marches step_mild over [0, T], recording snapshots. Checks mass
// conservation (1e-10) and the boundary-mass monitor every step.
MildRun solve(const RealField& nu0, double T, const InteractionKernel& kernel,
              const SolverOptions& options);

enum class PicardStart { free_flow, frozen_initial };

struct PicardResult {
    MildRun run;
    std::vector<double> residual_history;  // sup-over-times dual-norm change per sweep
    bool converged = false;
};

struct PicardOptions {
    std::size_t coarse_steps = 16;  // quadrature nodes of the Duhamel integral
    double tol = 2e-4;
    std::size_t max_iter = 12;
    double sigma = std::sqrt(2.0);
    GridPtr freq_grid;  // required: convergence is measured in the dual norm
    SobolevOrder order{6.0, 1};
    PicardStart start = PicardStart::free_flow;
};

// Global fixed-point iteration of the mild identity on a coarse time grid,
// independent of the time stepper; converged=false reports the residual
// history instead of throwing.
PicardResult picard_iterate(const RealField& nu0, double T, const InteractionKernel& kernel,
                            const PicardOptions& options);

}  // namespace kinlab

#endif

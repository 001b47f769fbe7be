// Interacting kinetic particle system: pairwise drift, one Euler step with
// the exact joint Gaussian noise pair, full-trajectory simulation with stored
// increments, empirical characteristic functions, and path/increment IO.
//
// The velocity noise is sigma * dB and the position noise is sigma * dI with
// dI the time integral of the same Brownian increment, drawn jointly and
// exactly per step. Storing both series makes every path replayable and lets
// downstream consumers rebuild the stochastic Ito sums that drove it.

#ifndef KINLAB_PARTICLES_HPP
#define KINLAB_PARTICLES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kinlab/frequency_grid.hpp"
#include "kinlab/gaussian_calculus.hpp"
#include "kinlab/interaction.hpp"
#include "kinlab/kinetic.hpp"
#include "kinlab/rng.hpp"

namespace kinlab {

// Default smooth initial law: bimodal in x, centered Gaussian in v.
ProductMixtureDensity default_initial_density();

struct InitialSampler {
    enum class Kind { iid, lattice, file };

    Kind kind = Kind::iid;
    ProductMixtureDensity density = default_initial_density();
    bool lattice_random_shift = true;  // one common shift per draw, shared by all particles
    std::vector<KineticPoint> file_points;

    // iid: independent draws from the product density. lattice: a rank-one
    // lattice mapped through the inverse CDFs, all particles sharing a single
    // random shift (deterministic when the shift is disabled). file: the
    // stored points verbatim (count must match).
    std::vector<KineticPoint> sample(std::size_t n, Rng& rng) const;
};

struct SimConfig {
    std::size_t N = 64;
    double T = 1.0;
    double dt = 2e-3;
    double sigma = std::sqrt(2.0);  // admitted values: 0 or sqrt(2)
    InteractionKernel kernel = InteractionKernel::kuramoto(0.5);
    InitialSampler initial;
    std::uint64_t seed = 1;
    std::size_t snapshot_count = 33;  // includes t = 0 and t = T

    std::size_t n_steps() const;
    void validate() const;
};

struct EnsemblePath {
    std::vector<double> times;                      // n_steps + 1 entries
    std::vector<std::vector<KineticPoint>> states;  // per time, N points
    std::vector<double> db;                         // n_steps x N, row-major by step
    std::vector<double> di;                         // same layout, integrated increments
    std::vector<std::size_t> snapshot_indices;      // increasing, first 0, last n_steps
    SimConfig config;

    std::size_t n_particles() const { return states.empty() ? 0 : states.front().size(); }
    std::size_t n_steps() const { return times.empty() ? 0 : times.size() - 1; }
    double db_at(std::size_t m, std::size_t i) const { return db[m * n_particles() + i]; }
    double di_at(std::size_t m, std::size_t i) const { return di[m * n_particles() + i]; }
    std::vector<double> snapshot_times() const;
};

// Snapshot rule shared by the simulation, the solver reference, and the
// reports: count step indices spread uniformly over 0..n_steps by rounding.
std::vector<std::size_t> snapshot_index_set(std::size_t n_steps, std::size_t count);

// Per-particle mean interaction force (1/N) sum_{j != i} gamma(x_i - x_j, v_i - v_j).
// Dispatches to an O(N) path for sine_mode kernels; the reference is O(N^2).
std::vector<double> drift_pairwise(const std::vector<KineticPoint>& state,
                                   const InteractionKernel& kernel);
std::vector<double> drift_pairwise_reference(const std::vector<KineticPoint>& state,
                                             const InteractionKernel& kernel);

// One Euler step with exact kinetic noise:
// v' = v + drift dt + sigma dB, x' = x + v dt + sigma dI.
std::vector<KineticPoint> step(const std::vector<KineticPoint>& state, double dt,
                               const double* db_row, const double* di_row,
                               const InteractionKernel& kernel, double sigma);

// Draws one joint increment pair: dB ~ N(0, dt), dI = int of B over the step,
// Cov(dI, dB) = dt^2/2, Var(dI) = dt^3/3.
void draw_increment(Rng& rng, double dt, double& dB, double& dI);

// Full simulation: samples the initial state, generates increments, stores
// everything. Deterministic replay under a fixed config. Throws
// std::runtime_error with the step index if any state goes non-finite.
EnsemblePath simulate(const SimConfig& config);

// Same, but drives the path with caller-supplied increments (layout as in
// EnsemblePath::db/di). The initial state is still drawn from config.seed, so
// ladders of coupled runs share their initial data.
EnsemblePath simulate(const SimConfig& config, const std::vector<double>& db,
                      const std::vector<double>& di);

// Coarsens increment series by an integer factor: Brownian increments add;
// integrated increments pick up the running Brownian offset within the block.
void aggregate_increments(const std::vector<double>& db_fine, const std::vector<double>& di_fine,
                          std::size_t n_particles, std::size_t factor, double dt_fine,
                          std::vector<double>& db_coarse, std::vector<double>& di_coarse);

// Characteristic function of the equal-mass empirical measure at a stored time.
SpectralField empirical_char(const EnsemblePath& path, std::size_t t_index, const GridPtr& grid);

// CSV export of snapshot states (t, particle_id, x, v) and the bit-exact
// binary round trip of the increment series.
void write_path_csv(const EnsemblePath& path, const std::string& file);
void write_increments(const EnsemblePath& path, const std::string& file);

// Snapshot states parsed back from the CSV layout above. Rows must be grouped
// by time with consistent particle counts.
struct PathSnapshots {
    std::vector<double> times;
    std::vector<std::vector<KineticPoint>> states;
};
PathSnapshots read_path_csv(const std::string& file);

struct IncrementFile {
    std::uint32_t n = 0;
    std::uint32_t m = 0;
    std::uint16_t d = 1;
    std::vector<double> db, di;
};
IncrementFile read_increments(const std::string& file);

}  // namespace kinlab

#endif

// Stochastic convolution fields assembled from stored particle paths. The
// velocity noise of each step enters a frequency-space Ito sum whose dual
// norm tracks the fluctuation part of the empirical measure; the same field
// closes the discrete weak-mild identity that links particle snapshots to the
// free flow, the interaction drift, and the noise.

#ifndef KINLAB_CONVOLUTION_LAB_HPP
#define KINLAB_CONVOLUTION_LAB_HPP

#include <cmath>
#include <string>
#include <vector>

#include "kinlab/frequency_grid.hpp"
#include "kinlab/kinetic.hpp"
#include "kinlab/particles.hpp"

namespace kinlab {

// One assembled field at a snapshot time t:
//   values(xi, eta) = (i sqrt(2)/N) sum_{i} sum_{m: t_m < t}
//       exp(i [xi (x^i_m + tau v^i_m) + eta v^i_m]) (eta + tau xi)
//       G(tau, xi, eta) dB^i_m,          tau = t - t_m.
// Pairing it against a test transform, (2pi)^{-2d} sum w f_hat values,
// reproduces the Ito sum of sqrt(2) grad_v(P_tau f) dB / N with the gradient
// evaluated by the same grid quadrature. The origin entry is exactly zero
// because the multiplier eta + tau xi vanishes there.
struct ZField {
    double t = 0.0;
    SpectralField field;
};

// Binds a stored path to the frequency grid the fields are assembled on. The
// path must outlive the accumulator; consumers that take both a path and an
// accumulator reject mismatched pairs.
class ZAccumulator {
public:
    ZAccumulator(const EnsemblePath& path, GridPtr grid);

    const EnsemblePath& path() const { return *path_; }
    const GridPtr& grid() const { return grid_; }
    std::vector<double> snapshot_times() const { return path_->snapshot_times(); }

private:
    const EnsemblePath* path_;
    GridPtr grid_;
};

// Definitional evaluation at one recorded snapshot time: one pass over every
// step before t. Throws std::invalid_argument when t is not recorded.
ZField z_field_at(const ZAccumulator& acc, double t);

// All recorded snapshots in one sweep. When every snapshot gap delta shears
// the grid onto itself (delta h_xi / h_eta an integer) the fields advance
// incrementally, Z_{t+delta}(xi, eta) = G(delta, xi, eta) Z_t(xi, eta +
// delta xi) plus the terms of the steps inside the gap, which is exact by the
// kernel composition rule; sheared sources leaving the eta band are dropped,
// an error suppressed by both the kernel decay across the gap and the weight
// at the band edge. Falls back to the direct sum per snapshot otherwise.
std::vector<ZField> z_fields_at_snapshots(const ZAccumulator& acc);

// max over the recorded snapshots (or a subset of their times) of the dual
// norm of the assembled field
double z_sup_dual_norm(const ZAccumulator& acc, const SobolevOrder& order);
double z_sup_dual_norm(const ZAccumulator& acc, const SobolevOrder& order,
                       const std::vector<double>& snapshot_subset);

// The four terms of the discrete weak-mild identity at a recorded snapshot,
// every one evaluated through the same grid quadrature against f_hat:
//   lhs      <nu_t, f>
//   initial  <nu_0, P_t f>, via the exact pushforward characteristic function
//   drift    sum_{m: t_m < t} dt <nu_m, (force * nu_m) grad_v P_{t-t_m} f>
//            with the empirical force field (1/N) sum_j gamma(. - x_j, . - v_j)
//   noise    z_t(f)
// In continuous time lhs = initial + drift + noise holds pathwise, so the
// residual measures the time-discretization error of the stored path.
struct MildIdentityTerms {
    double lhs = 0.0;
    double initial = 0.0;
    double drift = 0.0;
    double noise = 0.0;

    double residual() const { return std::fabs(lhs - initial - drift - noise); }
};

MildIdentityTerms mild_identity_terms(const EnsemblePath& path, const ZAccumulator& acc,
                                      const SpectralField& f_hat, double t);

// |lhs - initial - drift - noise|; rejects an accumulator built on a
// different path object or a transform on a different grid
double mild_identity_residual(const EnsemblePath& path, const ZAccumulator& acc,
                              const SpectralField& f_hat, double t);

// rows t, xi, eta, re, im with a header line, written atomically
void write_zfield_csv(const ZField& zf, const std::string& file);

}  // namespace kinlab

#endif

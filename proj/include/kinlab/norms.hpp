// Characteristic functions of discrete measures, kinetic Sobolev norms on the
// frequency grid, and the analytic tail certificate for the truncated box.

#ifndef KINLAB_NORMS_HPP
#define KINLAB_NORMS_HPP

#include <complex>
#include <vector>

#include "kinlab/frequency_grid.hpp"
#include "kinlab/kinetic.hpp"

namespace kinlab {

// values(xi,eta) = sum_k masses_k exp(i(xi x_k + eta v_k)).
// masses must be nonnegative and sum to 1 within 1e-12.
SpectralField measure_char(const std::vector<KineticPoint>& points,
                           const std::vector<double>& masses, const GridPtr& grid);

// equal-mass convenience used for empirical measures
SpectralField measure_char(const std::vector<KineticPoint>& points, const GridPtr& grid);

// (2pi)^{-2d} ( sum_nodes weight * w_{-s} * |mu_hat|^2 )^{1/2}
double dual_norm(const SpectralField& mu_hat, const SobolevOrder& order);

// same quadrature with |mu_hat| == 1 everywhere (the point mass at the origin),
// summed in the same order so it matches dual_norm of a unit field bitwise
double dual_norm_delta(const FrequencyGrid& grid, const SobolevOrder& order);

// ( sum_nodes weight * w_{+s} * |f_hat|^2 )^{1/2}, the H^s_k grid norm
double grid_fn_norm(const SpectralField& f_hat, const SobolevOrder& order);

// Analytic upper bound on (2pi)^{-2d} int_{outside box} w_{-s}, via the
// Beta-function reduction of the weight integral. Requires s > 2d.
double tail_bound(const SobolevOrder& order, double xi_max, double eta_max);

// Entrywise difference a - b of two fields on the same grid.
SpectralField field_difference(const SpectralField& a, const SpectralField& b);

// <mu, f> = (2pi)^{-2d} sum_nodes weight * f_hat * mu_hat  (no conjugate: the
// function transform uses e^{-i(xi x + eta v)} while the measure side uses
// e^{+i(xi x + eta v)}, so the plain product is Fourier inversion)
std::complex<double> duality_pairing(const SpectralField& f_hat, const SpectralField& mu_hat,
                                     int d = 1);

}  // namespace kinlab

#endif

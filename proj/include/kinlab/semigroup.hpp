// The free kinetic semigroup: the Fourier multiplier kernel, the transition
// density, exact spectral application on periodic physical grids (backward on
// test functions, forward on densities), a Monte Carlo evaluation oracle, and
// a pointwise kernel time-regularity probe.
//
// Spectral transforms run on a periodic box; the transport shear is applied
// as an exact per-mode phase in the mixed (xi, v) representation, never by
// interpolation. Calls that would shear significant content past the velocity
// frequency band are rejected.

#ifndef KINLAB_SEMIGROUP_HPP
#define KINLAB_SEMIGROUP_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "kinlab/frequency_grid.hpp"
#include "kinlab/kinetic.hpp"

namespace kinlab {

// G(t, xi, eta) = exp(-t^3/3 xi^2 - t^2 xi eta - t eta^2); the exponent equals
// -int_0^t (eta + r xi)^2 dr, so G lies in (0, 1].
double kernel_G(double t, double xi, double eta);

// Transition density of the kinetic noise pair at time t > 0; integrates to 1
// with covariance blocks (2t^3/3, t^2, 2t).
double density_pt(double t, double x, double v);

// Checks |G(t-r) - G(u-r)| <= (1/4) eta^2 (t-u) at one argument tuple.
// Requires 0 <= r <= u <= t.
bool kernel_time_regularity_check(double r, double u, double t, double xi, double eta);

// Periodic box [-Lx, Lx) x [-Lv, Lv) with power-of-two sizes.
struct PhysicalGrid {
    double Lx = 0.0, Lv = 0.0;
    std::size_t nx = 0, nv = 0;

    static PhysicalGrid make(double Lx, double Lv, std::size_t nx, std::size_t nv);

    double dx() const { return 2.0 * Lx / static_cast<double>(nx); }
    double dv() const { return 2.0 * Lv / static_cast<double>(nv); }
    double cell() const { return dx() * dv(); }
    std::size_t size() const { return nx * nv; }

    double x_node(std::size_t j) const { return -Lx + static_cast<double>(j) * dx(); }
    double v_node(std::size_t k) const { return -Lv + static_cast<double>(k) * dv(); }

    // signed DFT mode values; Nyquist magnitude is pi/L * n/2
    double xi_mode(std::size_t a) const;
    double eta_mode(std::size_t b) const;
};

bool operator==(const PhysicalGrid& a, const PhysicalGrid& b);

// Real scalar field sampled on a PhysicalGrid, row-major with v fastest.
class RealField {
 public:
    RealField() = default;
    explicit RealField(const PhysicalGrid& g) : grid_(g), vals_(g.size(), 0.0) {}

    const PhysicalGrid& grid() const { return grid_; }
    double& at(std::size_t j, std::size_t k) { return vals_[j * grid_.nv + k]; }
    double at(std::size_t j, std::size_t k) const { return vals_[j * grid_.nv + k]; }
    double* data() { return vals_.data(); }
    const double* data() const { return vals_.data(); }
    std::size_t size() const { return vals_.size(); }

    void fill(const std::function<double(double, double)>& f);
    double integral() const;  // sum * cell
    double max_abs() const;
    bool all_finite() const;
    double min_value() const;

    // share of sum |values| carried by the outer frame of relative width `frame`
    double boundary_mass_fraction(double frame = 0.1) const;

 private:
    PhysicalGrid grid_;
    std::vector<double> vals_;
};

// Backward action on test functions: output transform is
// G(t, xi, eta - t xi) fhat(xi, eta - t xi). t = 0 is the identity.
// Throws std::domain_error if significant content would shear out of band.
RealField apply_Pt_function(const RealField& f, double t);

// d/dv of the backward action, computed with the direct sheared multiplier
// i (eta + t xi) G(t, xi, eta) applied before the shear. t > 0 required by the
// caller contract, t = 0 degrades to plain spectral d/dv.
RealField grad_v_Pt_function(const RealField& f, double t);

// Plain spectral d/dv (i eta multiplier). Composing this after
// apply_Pt_function must agree with grad_v_Pt_function to transform round-off.
RealField spectral_grad_v(const RealField& f);

// Forward action on densities: output transform is
// G(t, xi, eta) fhat0(xi, eta + t xi); with_noise=false drops G (pure
// transport, the sigma = 0 mode). Mass is conserved exactly at the zero mode.
RealField apply_forward_flow(const RealField& density, double t, bool with_noise = true);

// Circular convolution on a shared grid, scaled by the cell area so it
// approximates the integral convolution. The kernel field must be sampled by
// displacement index (entry (p, q) holds gamma at displacement p dx, q dv
// wrapped into the box).
RealField periodic_convolve(const RealField& f, const RealField& kernel_by_index);

// Forward action on the characteristic function of a discrete measure,
// evaluated exactly: sum_k m_k exp(i(xi (x_k + t v_k) + eta v_k)) G(t, xi, eta).
SpectralField apply_Pt_measure(const std::vector<KineticPoint>& points,
                               const std::vector<double>& masses,
                               const GridPtr& grid, double t);

// Forward action on a tabulated characteristic function. The sheared source
// eta + t xi must land on grid nodes (t h_xi / h_eta integral); sources
// falling outside the band are admitted only where G <= 1e-12.
SpectralField apply_Pt_measure(const SpectralField& nu_hat, double t);

struct McEstimate {
    double estimate = 0.0;
    double stderr_est = 0.0;
};

// Monte Carlo evaluation of E[f(x + tv + X_t, v + V_t)] from n exact joint
// Gaussian draws; reproducible under a fixed seed. Requires n >= 100.
McEstimate semigroup_mc_oracle(const std::function<double(double, double)>& f,
                               const KineticPoint& p, double t,
                               std::size_t n, std::uint64_t seed);

}  // namespace kinlab

#endif

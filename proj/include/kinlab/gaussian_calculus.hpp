// Closed forms for everything Gaussian: the kinetic noise covariance, Gaussian
// test functions with exact semigroup images, bivariate Gaussian densities
// under the free kinetic flow, and 1d Gaussian mixtures with invertible CDFs.
//
// These are the analytic oracles the test suite checks the numerical paths
// against, so they deliberately share no code with the spectral operators.

#ifndef KINLAB_GAUSSIAN_CALCULUS_HPP
#define KINLAB_GAUSSIAN_CALCULUS_HPP

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kinlab/frequency_grid.hpp"
#include "kinlab/rng.hpp"

namespace kinlab {

// Second moments of the kinetic noise pair (X_t, V_t) = (sqrt2 int_0^t B ds, sqrt2 B_t).
struct KineticGaussian {
    double t;

    explicit KineticGaussian(double time) : t(time) {
        if (t <= 0.0) throw std::invalid_argument("KineticGaussian: t must be positive");
    }

    double var_x() const { return 2.0 * t * t * t / 3.0; }
    double cov_xv() const { return t * t; }
    double var_v() const { return 2.0 * t; }
    double block_det() const { return var_x() * var_v() - cov_xv() * cov_xv(); }  // = t^4/3

    // exact joint draw: V = sqrt(2t) Z1, X = t^{3/2} (Z1/sqrt2 + Z2/sqrt6)
    std::pair<double, double> sample(Rng& rng) const {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double x = std::pow(t, 1.5) * (z1 / std::sqrt(2.0) + z2 / std::sqrt(6.0));
        const double v = std::sqrt(2.0 * t) * z1;
        return {x, v};
    }
};

// f(x,v) = amp exp(-(x-x0)^2/(2 sx^2) - (v-v0)^2/(2 sv^2)) with closed-form
// transform and closed-form P_t f, grad_v P_t f (Gaussian convolution identity).
struct GaussianBump {
    double amp = 1.0;
    double x0 = 0.0, v0 = 0.0;
    double sx = 1.0, sv = 1.0;

    double value(double x, double v) const {
        const double a = (x - x0) / sx, b = (v - v0) / sv;
        return amp * std::exp(-0.5 * (a * a + b * b));
    }

    // f_hat(xi,eta) = int e^{-i(xi x + eta v)} f dx dv
    std::complex<double> fhat(double xi, double eta) const {
        const double mag = amp * 2.0 * M_PI * sx * sv *
                           std::exp(-0.5 * (sx * sx * xi * xi + sv * sv * eta * eta));
        return std::polar(mag, -(xi * x0 + eta * v0));
    }

    SpectralField fhat_field(const GridPtr& grid) const {
        SpectralField out(grid);
        for (std::size_t a = 0; a < grid->n_xi(); ++a)
            for (std::size_t b = 0; b < grid->n_eta(); ++b)
                out.at(a, b) = fhat(grid->xi_nodes[a], grid->eta_nodes[b]);
        return out;
    }

    // E f(x + tv + X_t, v + V_t); sigma = sqrt2 noise blocks (2t^3/3, t^2, 2t)
    double Pt(double t, double x, double v) const {
        if (t == 0.0) return value(x, v);
        double p, dv;
        eval(t, x, v, p, dv);
        return p;
    }

    double dv_Pt(double t, double x, double v) const {
        if (t == 0.0) return -((v - v0) / (sv * sv)) * value(x, v);
        double p, dv;
        eval(t, x, v, p, dv);
        return dv;
    }

private:
    void eval(double t, double x, double v, double& p, double& dvp) const {
        // C = Lambda^{-1} + Sigma_t with Lambda the quadratic form of f
        const double c00 = sx * sx + 2.0 * t * t * t / 3.0;
        const double c01 = t * t;
        const double c11 = sv * sv + 2.0 * t;
        const double det = c00 * c11 - c01 * c01;
        const double mx = x + t * v - x0;
        const double mv = v - v0;
        const double g0 = (c11 * mx - c01 * mv) / det;   // (C^{-1} m)_x
        const double g1 = (-c01 * mx + c00 * mv) / det;  // (C^{-1} m)_v
        const double q = 0.5 * (mx * g0 + mv * g1);
        p = amp * (sx * sv / std::sqrt(det)) * std::exp(-q);
        // m depends on v through (t, 1)
        dvp = -(t * g0 + g1) * p;
    }
};

// General bivariate Gaussian (weighted), closed under the free kinetic flow.
struct Gaussian2D {
    double weight = 1.0;
    double mx = 0.0, mv = 0.0;
    double cxx = 1.0, cxv = 0.0, cvv = 1.0;

    double density(double x, double v) const {
        const double det = cxx * cvv - cxv * cxv;
        const double dx = x - mx, dv = v - mv;
        const double q = (cvv * dx * dx - 2.0 * cxv * dx * dv + cxx * dv * dv) / det;
        return weight / (2.0 * M_PI * std::sqrt(det)) * std::exp(-0.5 * q);
    }

    // law of (x + tv + X_t, v + V_t); with_noise=false is pure free transport
    Gaussian2D kinetic_push(double t, bool with_noise = true) const {
        Gaussian2D g = *this;
        g.mx = mx + t * mv;
        g.mv = mv;
        // M C M^T with M = [[1,t],[0,1]]
        g.cxx = cxx + 2.0 * t * cxv + t * t * cvv;
        g.cxv = cxv + t * cvv;
        g.cvv = cvv;
        if (with_noise) {
            g.cxx += 2.0 * t * t * t / 3.0;
            g.cxv += t * t;
            g.cvv += 2.0 * t;
        }
        return g;
    }

    // char function at (xi, eta) with the measure-side sign convention e^{+i}
    std::complex<double> char_at(double xi, double eta) const {
        const double q = cxx * xi * xi + 2.0 * cxv * xi * eta + cvv * eta * eta;
        return weight * std::polar(std::exp(-0.5 * q), mx * xi + mv * eta);
    }
};

// 1d Gaussian mixture with pdf/cdf and a Newton-with-bisection inverse CDF,
// used by the deterministic lattice sampler.
struct GaussianMixture1D {
    std::vector<double> weights, means, sigmas;

    double pdf(double x) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double z = (x - means[i]) / sigmas[i];
            acc += weights[i] * std::exp(-0.5 * z * z) / (sigmas[i] * std::sqrt(2.0 * M_PI));
        }
        return acc;
    }

    double cdf(double x) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
            acc += weights[i] * 0.5 * std::erfc(-(x - means[i]) / (sigmas[i] * std::sqrt(2.0)));
        return acc;
    }

    double inv_cdf(double u) const {
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("inv_cdf: u must be in (0,1)");
        double lo = means[0], hi = means[0];
        for (std::size_t i = 0; i < weights.size(); ++i) {
            lo = std::min(lo, means[i] - 12.0 * sigmas[i]);
            hi = std::max(hi, means[i] + 12.0 * sigmas[i]);
        }
        double x = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            const double f = cdf(x) - u;
            (f > 0.0 ? hi : lo) = x;
            const double d = pdf(x);
            double step = d > 0.0 ? -f / d : 0.0;
            double next = x + step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::fabs(next - x) < 1e-15 * (1.0 + std::fabs(x))) return next;
            x = next;
        }
        return x;
    }

    double sample(Rng& rng) const {
        double u = rng.uniform();
        std::size_t i = 0;
        for (; i + 1 < weights.size(); ++i) {
            if (u < weights[i]) break;
            u -= weights[i];
        }
        return means[i] + sigmas[i] * rng.normal();
    }
};

// Product initial condition rho_x(x) rho_v(v) built from two 1d mixtures; its
// components evolve in closed form under the free kinetic flow.
struct ProductMixtureDensity {
    GaussianMixture1D rho_x;
    GaussianMixture1D rho_v;

    double density(double x, double v) const { return rho_x.pdf(x) * rho_v.pdf(v); }

    std::vector<Gaussian2D> components() const {
        std::vector<Gaussian2D> out;
        for (std::size_t i = 0; i < rho_x.weights.size(); ++i)
            for (std::size_t j = 0; j < rho_v.weights.size(); ++j) {
                Gaussian2D g;
                g.weight = rho_x.weights[i] * rho_v.weights[j];
                g.mx = rho_x.means[i];
                g.mv = rho_v.means[j];
                g.cxx = rho_x.sigmas[i] * rho_x.sigmas[i];
                g.cxv = 0.0;
                g.cvv = rho_v.sigmas[j] * rho_v.sigmas[j];
                out.push_back(g);
            }
        return out;
    }
};

}  // namespace kinlab

#endif

// Phase-space points, the kinetic distance, and the anisotropic Sobolev weight.
//
// The whole laboratory is specialized to one space dimension (d = 1): every
// acceptance experiment runs at d = 1 and the closed-form oracles below are
// one-dimensional. SobolevOrder keeps d as data so the s > 2d admissibility
// checks read like the general theory.

#ifndef KINLAB_KINETIC_HPP
#define KINLAB_KINETIC_HPP

#include <cmath>
#include <stdexcept>

namespace kinlab {

struct KineticPoint {
    double x = 0.0;
    double v = 0.0;
};

inline bool finite(const KineticPoint& p) {
    return std::isfinite(p.x) && std::isfinite(p.v);
}

// |x-y|^{1/3} + |v-w|: position regularity is one third of velocity regularity
// under the kinetic flow, so position differences enter through a cube root.
inline double kinetic_distance(const KineticPoint& p, const KineticPoint& q) {
    if (!finite(p) || !finite(q)) throw std::invalid_argument("kinetic_distance: non-finite input");
    return std::cbrt(std::fabs(p.x - q.x)) + std::fabs(p.v - q.v);
}

struct SobolevOrder {
    double s = 6.0;
    int d = 1;

    // dual-norm admissibility: the weight w_{-s} must be integrable
    bool dual_admissible() const { return s > 2.0 * d; }
    // the convergence experiment needs three extra orders of decay
    bool lln_admissible() const { return s > 2.0 * d + 3.0; }
};

// (1 + |xi|^{2/3} + |eta|^2)^s, the Fourier weight of the kinetic Sobolev scale
inline double sobolev_weight(double xi, double eta, double s) {
    const double base = 1.0 + std::cbrt(xi * xi) + eta * eta;
    return std::pow(base, s);
}

}  // namespace kinlab

#endif

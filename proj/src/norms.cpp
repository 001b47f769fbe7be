#include "kinlab/norms.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kinlab {

namespace {

constexpr double two_pi = 6.283185307179586476925286766559;

// Phase matrix P[k][j] = exp(i * nodes[j] * y_k) for uniformly spaced nodes,
// built by recurrence from the zero node outward (one exp per point, two
// multiplications per node). Rows are points, columns are nodes.
Eigen::MatrixXcd phase_matrix(const std::vector<double>& y, const std::vector<double>& nodes,
                              std::size_t first, std::size_t last_inclusive,
                              const std::vector<double>* scale = nullptr) {
    const std::size_t n = last_inclusive - first + 1;
    Eigen::MatrixXcd P(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(n));
    const double h = nodes.size() > 1 ? nodes[1] - nodes[0] : 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const std::complex<double> step = std::polar(1.0, h * y[k]);
        std::complex<double> cur = std::polar(scale ? (*scale)[k] : 1.0, nodes[first] * y[k]);
        for (std::size_t j = 0; j < n; ++j) {
            P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = cur;
            cur *= step;
        }
    }
    return P;
}

// shared quadrature kernel: sum of weight * w_{-s} * |values|^2 (values == 1 if null)
double dual_norm_sq(const FrequencyGrid& g, double s, const Eigen::MatrixXcd* values) {
    double acc = 0.0;
    for (std::size_t a = 0; a < g.n_xi(); ++a) {
        const double xi = g.xi_nodes[a];
        const double wa = g.xi_weights[a];
        double row = 0.0;
        for (std::size_t b = 0; b < g.n_eta(); ++b) {
            const double w = sobolev_weight(xi, g.eta_nodes[b], -s);
            const double m2 =
                values ? std::norm((*values)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)))
                       : 1.0;
            row += g.eta_weights[b] * w * m2;
        }
        acc += wa * row;
    }
    return acc;
}

}  // namespace

SpectralField measure_char(const std::vector<KineticPoint>& points,
                           const std::vector<double>& masses, const GridPtr& grid) {
    if (points.empty()) throw std::invalid_argument("measure_char: empty point list");
    if (points.size() != masses.size())
        throw std::invalid_argument("measure_char: points/masses size mismatch");
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0)) throw std::invalid_argument("measure_char: negative mass");
        total += m;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw std::invalid_argument("measure_char: masses must sum to 1 within 1e-12");
    for (const auto& p : points)
        if (!finite(p)) throw std::invalid_argument("measure_char: non-finite point");

    const FrequencyGrid& g = *grid;
    std::vector<double> xs(points.size()), vs(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        xs[k] = points[k].x;
        vs[k] = points[k].v;
    }

    // conjugate symmetry values(-xi,-eta) = conj(values(xi,eta)) lets us run the
    // dense product only on the xi >= 0 half of the grid
    const std::size_t a0 = g.zero_xi_index();
    Eigen::MatrixXcd U = phase_matrix(xs, g.xi_nodes, a0, g.n_xi() - 1, &masses);
    Eigen::MatrixXcd W = phase_matrix(vs, g.eta_nodes, 0, g.n_eta() - 1);

    SpectralField out(grid);
    out.values.bottomRows(static_cast<Eigen::Index>(g.n_xi() - a0)).noalias() =
        U.transpose() * W;
    for (std::size_t a = 0; a < a0; ++a)
        for (std::size_t b = 0; b < g.n_eta(); ++b)
            out.at(a, b) = std::conj(out.at(g.n_xi() - 1 - a, g.n_eta() - 1 - b));
    return out;
}

SpectralField measure_char(const std::vector<KineticPoint>& points, const GridPtr& grid) {
    std::vector<double> masses(points.size(), 1.0 / static_cast<double>(points.size()));
    return measure_char(points, masses, grid);
}

double dual_norm(const SpectralField& mu_hat, const SobolevOrder& order) {
    if (!order.dual_admissible())
        throw std::invalid_argument("dual_norm: requires s > 2d");
    const double sq = dual_norm_sq(*mu_hat.grid, order.s, &mu_hat.values);
    return std::pow(two_pi, -2.0 * order.d) * std::sqrt(sq);
}

double dual_norm_delta(const FrequencyGrid& grid, const SobolevOrder& order) {
    if (!order.dual_admissible())
        throw std::invalid_argument("dual_norm_delta: requires s > 2d");
    const double sq = dual_norm_sq(grid, order.s, nullptr);
    return std::pow(two_pi, -2.0 * order.d) * std::sqrt(sq);
}

double grid_fn_norm(const SpectralField& f_hat, const SobolevOrder& order) {
    const FrequencyGrid& g = *f_hat.grid;
    double acc = 0.0;
    for (std::size_t a = 0; a < g.n_xi(); ++a) {
        const double xi = g.xi_nodes[a];
        double row = 0.0;
        for (std::size_t b = 0; b < g.n_eta(); ++b)
            row += g.eta_weights[b] * sobolev_weight(xi, g.eta_nodes[b], order.s) *
                   std::norm(f_hat.at(a, b));
        acc += g.xi_weights[a] * row;
    }
    return std::sqrt(acc);
}

namespace {

// int_0^{w0} (1-w)^{1/2} w^q dw; the series coefficients of (1-w)^{1/2} are
// negative from k = 1 on, so any partial sum is an upper bound
double incomplete_beta_up_half(double w0, double q) {
    double coeff = 1.0;  // binom(1/2, k) * (-1)^k, starts at k = 0
    double acc = 0.0;
    for (int k = 0; k <= 12; ++k) {
        acc += coeff * std::pow(w0, q + k + 1) / (q + k + 1);
        // binom(1/2,k+1)*(-1)^{k+1} = coeff * (k - 1/2) / (k + 1)
        coeff *= (static_cast<double>(k) - 0.5) / (static_cast<double>(k) + 1.0);
    }
    return acc;
}

// int_0^{w0} (1-w)^{-1/2} w^q dw with a rigorous positive remainder bound added
double incomplete_beta_up_neg_half(double w0, double q) {
    double a = 1.0;  // binom(2k,k)/4^k
    double acc = 0.0;
    int K = 12;
    for (int k = 0; k <= K; ++k) {
        acc += a * std::pow(w0, q + k + 1) / (q + k + 1);
        a *= (2.0 * k + 1.0) / (2.0 * k + 2.0);
    }
    // remaining coefficients are below the last one computed; bound the series
    // tail by a geometric sum
    acc += a * std::pow(w0, q + K + 2) / ((q + K + 2) * (1.0 - w0));
    return acc;
}

}  // namespace

double tail_bound(const SobolevOrder& order, double xi_max, double eta_max) {
    if (!order.dual_admissible())
        throw std::invalid_argument("tail_bound: tail diverges for s <= 2d");
    if (xi_max <= 0.0 || eta_max <= 0.0)
        throw std::invalid_argument("tail_bound: cutoffs must be positive");
    const double s = order.s;

    // strip |xi| > Xi: the eta line integrates to c_eta (1+xi^{2/3})^{1/2-s};
    // substituting u = xi^{2/3} then w = 1/(1+u) turns the xi integral into
    // (3/2) int_0^{w0} (1-w)^{1/2} w^{s-3} dw
    const double c_eta = std::sqrt(M_PI) * std::tgamma(s - 0.5) / std::tgamma(s);
    const double w_xi = 1.0 / (1.0 + std::cbrt(xi_max * xi_max));
    const double t_xi = 3.0 * c_eta * incomplete_beta_up_half(w_xi, s - 3.0);

    // strip |eta| > H: the xi line integrates to c_xi (1+eta^2)^{3/2-s};
    // substituting u = eta^2 then w = 1/(1+u) gives
    // (1/2) int_0^{w0} (1-w)^{-1/2} w^{s-3} dw per side
    const double c_xi = 3.0 * std::tgamma(1.5) * std::tgamma(s - 1.5) / std::tgamma(s);
    const double w_eta = 1.0 / (1.0 + eta_max * eta_max);
    const double t_eta = c_xi * incomplete_beta_up_neg_half(w_eta, s - 3.0);

    return std::pow(two_pi, -2.0 * order.d) * (t_xi + t_eta);
}

SpectralField field_difference(const SpectralField& a, const SpectralField& b) {
    check_same_grid(a, b);
    SpectralField out(a.grid);
    out.values = a.values - b.values;
    return out;
}

std::complex<double> duality_pairing(const SpectralField& f_hat, const SpectralField& mu_hat,
                                     int d) {
    check_same_grid(f_hat, mu_hat);
    const FrequencyGrid& g = *f_hat.grid;
    std::complex<double> acc = 0.0;
    for (std::size_t a = 0; a < g.n_xi(); ++a) {
        std::complex<double> row = 0.0;
        for (std::size_t b = 0; b < g.n_eta(); ++b)
            row += g.eta_weights[b] * f_hat.at(a, b) * mu_hat.at(a, b);
        acc += g.xi_weights[a] * row;
    }
    return std::pow(two_pi, -2.0 * d) * acc;
}

}  // namespace kinlab

#include "kinlab/convolution_lab.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

#include "kinlab/io_util.hpp"
#include "kinlab/norms.hpp"
#include "kinlab/semigroup.hpp"

namespace kinlab {

namespace {

using cplx = std::complex<double>;

constexpr double kTimeTol = 1e-9;

// locates t among the recorded snapshot times and returns its position in
// snapshot_indices
std::size_t snapshot_position(const EnsemblePath& path, double t) {
    for (std::size_t j = 0; j < path.snapshot_indices.size(); ++j) {
        if (std::fabs(path.times[path.snapshot_indices[j]] - t) <= kTimeTol) return j;
    }
    throw std::invalid_argument("z_field_at: time is not a recorded snapshot");
}

// Phase matrices for one step record. Columns follow the grid nodes; the
// recurrence multiplies by the per-node increment phase, anchored exactly at
// the first node.
Eigen::MatrixXcd phase_rows(const std::vector<double>& args, const std::vector<double>& nodes) {
    const Eigen::Index n = static_cast<Eigen::Index>(args.size());
    const Eigen::Index m = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXcd out(n, m);
    const double h = m > 1 ? nodes[1] - nodes[0] : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cplx cur = std::polar(1.0, nodes[0] * args[static_cast<std::size_t>(i)]);
        const cplx stepf = std::polar(1.0, h * args[static_cast<std::size_t>(i)]);
        for (Eigen::Index b = 0; b < m; ++b) {
            out(i, b) = cur;
            cur *= stepf;
        }
    }
    return out;
}

// Adds the terms of one stored step, seen from evaluation time t_m + tau, to
// the nonnegative-xi block. Rows follow xi >= 0 nodes, columns the eta nodes.
void accumulate_step(Eigen::MatrixXcd& half, const EnsemblePath& path, std::size_t m,
                     double tau, const FrequencyGrid& g) {
    const std::size_t n = path.n_particles();
    const std::size_t a0 = g.zero_xi_index();
    const Eigen::Index rows = half.rows();
    const Eigen::Index cols = half.cols();

    const auto& state = path.states[m];
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = state[i].x + tau * state[i].v;

    // U(i, j) = dB_i exp(i xi_{a0+j} (x_i + tau v_i)), built by the phase
    // recurrence along xi starting from xi = 0 where the phase is 1
    Eigen::MatrixXcd u(static_cast<Eigen::Index>(n), rows);
    for (std::size_t i = 0; i < n; ++i) {
        const double db = path.db_at(m, i);
        cplx cur(db, 0.0);
        const cplx stepf = std::polar(1.0, g.h_xi() * shifted[i]);
        for (Eigen::Index j = 0; j < rows; ++j) {
            u(static_cast<Eigen::Index>(i), j) = cur;
            cur *= stepf;
        }
    }

    std::vector<double> velocities(n);
    for (std::size_t i = 0; i < n; ++i) velocities[i] = state[i].v;
    const Eigen::MatrixXcd w = phase_rows(velocities, g.eta_nodes);

    Eigen::MatrixXcd s(rows, cols);
    s.noalias() = u.transpose() * w;

    const double s2n = std::sqrt(2.0) / static_cast<double>(n);
    for (Eigen::Index j = 0; j < rows; ++j) {
        const double xi = g.xi_nodes[a0 + static_cast<std::size_t>(j)];
        for (Eigen::Index b = 0; b < cols; ++b) {
            const double eta = g.eta_nodes[static_cast<std::size_t>(b)];
            const double mult = (eta + tau * xi) * kernel_G(tau, xi, eta) * s2n;
            half(j, b) += cplx(0.0, mult) * s(j, b);
        }
    }
}

// Expands the nonnegative-xi block into a full field using the conjugate
// symmetry Z(-xi, -eta) = conj(Z(xi, eta)) that every step term satisfies.
ZField materialize(double t, const Eigen::MatrixXcd& half, const GridPtr& grid) {
    const FrequencyGrid& g = *grid;
    const std::size_t a0 = g.zero_xi_index();
    ZField zf;
    zf.t = t;
    zf.field = SpectralField(grid);
    for (std::size_t a = a0; a < g.n_xi(); ++a)
        for (std::size_t b = 0; b < g.n_eta(); ++b)
            zf.field.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                half(static_cast<Eigen::Index>(a - a0), static_cast<Eigen::Index>(b));
    for (std::size_t a = 0; a < a0; ++a)
        for (std::size_t b = 0; b < g.n_eta(); ++b)
            zf.field.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                std::conj(zf.field.values(static_cast<Eigen::Index>(g.n_xi() - 1 - a),
                                          static_cast<Eigen::Index>(g.n_eta() - 1 - b)));
    return zf;
}

// In-place one-gap advance of the nonnegative-xi block: row j picks up the
// kernel factor and reads its source shift = j * ratio slots up in eta.
// Sources past the band edge are dropped.
void shear_half(Eigen::MatrixXcd& half, double delta, long ratio, const FrequencyGrid& g) {
    const std::size_t a0 = g.zero_xi_index();
    const Eigen::Index cols = half.cols();
    for (Eigen::Index j = 0; j < half.rows(); ++j) {
        const double xi = g.xi_nodes[a0 + static_cast<std::size_t>(j)];
        const long shift = static_cast<long>(j) * ratio;
        for (Eigen::Index b = 0; b < cols; ++b) {
            const long src = static_cast<long>(b) + shift;
            const double eta = g.eta_nodes[static_cast<std::size_t>(b)];
            half(j, b) = src < static_cast<long>(cols)
                             ? kernel_G(delta, xi, eta) * half(j, static_cast<Eigen::Index>(src))
                             : cplx(0.0, 0.0);
        }
    }
}

// kernel raised to sigma^2/2, so sigma = 0 gives the pure transport case
double kernel_G_scaled(double power, double t, double xi, double eta) {
    if (power == 0.0) return 1.0;
    const double ex = t * t * t / 3.0 * xi * xi + t * t * xi * eta + t * eta * eta;
    return std::exp(-power * ex);
}

}  // namespace

ZAccumulator::ZAccumulator(const EnsemblePath& path, GridPtr grid)
    : path_(&path), grid_(std::move(grid)) {
    if (!grid_) throw std::invalid_argument("ZAccumulator: null grid");
    if (path.states.empty() || path.times.size() != path.states.size())
        throw std::invalid_argument("ZAccumulator: path has no stored states");
    const std::size_t m = path.n_steps();
    const std::size_t n = path.n_particles();
    if (n == 0 || path.db.size() != m * n || path.di.size() != m * n)
        throw std::invalid_argument("ZAccumulator: increment records do not match the path");
    if (path.snapshot_indices.empty() || path.snapshot_indices.front() != 0 ||
        path.snapshot_indices.back() != m)
        throw std::invalid_argument("ZAccumulator: path has no usable snapshot set");
}

ZField z_field_at(const ZAccumulator& acc, double t) {
    const EnsemblePath& path = acc.path();
    const FrequencyGrid& g = *acc.grid();
    const std::size_t k = path.snapshot_indices[snapshot_position(path, t)];

    Eigen::MatrixXcd half = Eigen::MatrixXcd::Zero(
        static_cast<Eigen::Index>(g.n_xi() - g.zero_xi_index()),
        static_cast<Eigen::Index>(g.n_eta()));
    for (std::size_t m = 0; m < k; ++m)
        accumulate_step(half, path, m, path.times[k] - path.times[m], g);
    return materialize(path.times[k], half, acc.grid());
}

std::vector<ZField> z_fields_at_snapshots(const ZAccumulator& acc) {
    const EnsemblePath& path = acc.path();
    const FrequencyGrid& g = *acc.grid();
    const auto& idx = path.snapshot_indices;

    // every gap must shear the eta lattice onto itself for the incremental
    // sweep; otherwise evaluate each snapshot directly
    bool aligned = g.n_eta() > 1;
    std::vector<long> ratios(idx.size(), 0);
    for (std::size_t j = 1; aligned && j < idx.size(); ++j) {
        const double delta = path.times[idx[j]] - path.times[idx[j - 1]];
        const double r = delta * g.h_xi() / g.h_eta();
        ratios[j] = std::lround(r);
        if (std::fabs(r - static_cast<double>(ratios[j])) > 1e-9 || ratios[j] < 0)
            aligned = false;
    }

    std::vector<ZField> out;
    out.reserve(idx.size());
    if (!aligned) {
        for (std::size_t j = 0; j < idx.size(); ++j)
            out.push_back(z_field_at(acc, path.times[idx[j]]));
        return out;
    }

    Eigen::MatrixXcd half = Eigen::MatrixXcd::Zero(
        static_cast<Eigen::Index>(g.n_xi() - g.zero_xi_index()),
        static_cast<Eigen::Index>(g.n_eta()));
    out.push_back(materialize(path.times[idx[0]], half, acc.grid()));
    for (std::size_t j = 1; j < idx.size(); ++j) {
        const double t_new = path.times[idx[j]];
        shear_half(half, t_new - path.times[idx[j - 1]], ratios[j], g);
        for (std::size_t m = idx[j - 1]; m < idx[j]; ++m)
            accumulate_step(half, path, m, t_new - path.times[m], g);
        out.push_back(materialize(t_new, half, acc.grid()));
    }
    return out;
}

double z_sup_dual_norm(const ZAccumulator& acc, const SobolevOrder& order) {
    double best = 0.0;
    for (const ZField& zf : z_fields_at_snapshots(acc))
        best = std::max(best, dual_norm(zf.field, order));
    return best;
}

double z_sup_dual_norm(const ZAccumulator& acc, const SobolevOrder& order,
                       const std::vector<double>& snapshot_subset) {
    double best = 0.0;
    for (double t : snapshot_subset) best = std::max(best, dual_norm(z_field_at(acc, t).field, order));
    return best;
}

MildIdentityTerms mild_identity_terms(const EnsemblePath& path, const ZAccumulator& acc,
                                      const SpectralField& f_hat, double t) {
    if (&path != &acc.path())
        throw std::invalid_argument("mild_identity_terms: accumulator was built on another path");
    if (f_hat.grid != acc.grid())
        throw std::invalid_argument("mild_identity_terms: test transform lives on another grid");

    const FrequencyGrid& g = *acc.grid();
    const std::size_t k = path.snapshot_indices[snapshot_position(path, t)];
    const double tk = path.times[k];
    const std::size_t n = path.n_particles();
    const double sigma = path.config.sigma;

    MildIdentityTerms terms;
    terms.lhs = duality_pairing(f_hat, measure_char(path.states[k], acc.grid())).real();

    if (sigma > 0.0) {
        const std::vector<double> masses(n, 1.0 / static_cast<double>(n));
        terms.initial =
            duality_pairing(f_hat, apply_Pt_measure(path.states[0], masses, acc.grid(), tk))
                .real();
    } else {
        std::vector<KineticPoint> moved = path.states[0];
        for (auto& p : moved) p.x += tk * p.v;
        terms.initial = duality_pairing(f_hat, measure_char(moved, acc.grid())).real();
    }

    const InteractionKernel& kernel = path.config.kernel;
    if (kernel.structure != InteractionKernel::Structure::zero) {
        const double power = sigma * sigma / 2.0;
        const double inv2pi2 = 1.0 / (4.0 * M_PI * M_PI);
        const Eigen::Index nxi = static_cast<Eigen::Index>(g.n_xi());
        const Eigen::Index neta = static_cast<Eigen::Index>(g.n_eta());
        double drift_sum = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            const double tau = tk - path.times[m];
            const auto& state = path.states[m];

            // empirical force field at the particles, the full j sum
            std::vector<double> conv(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    s += kernel(state[i].x - state[j].x, state[i].v - state[j].v);
                conv[i] = s / static_cast<double>(n);
            }

            // grad_v(P_tau f) at the particles by the shared grid quadrature
            Eigen::MatrixXcd mul(nxi, neta);
            for (Eigen::Index a = 0; a < nxi; ++a) {
                const double xi = g.xi_nodes[static_cast<std::size_t>(a)];
                const double wxi = g.xi_weights[static_cast<std::size_t>(a)];
                for (Eigen::Index b = 0; b < neta; ++b) {
                    const double eta = g.eta_nodes[static_cast<std::size_t>(b)];
                    const double c = wxi * g.eta_weights[static_cast<std::size_t>(b)] * inv2pi2 *
                                     (eta + tau * xi) * kernel_G_scaled(power, tau, xi, eta);
                    mul(a, b) = cplx(0.0, c) * f_hat.values(a, b);
                }
            }
            std::vector<double> shifted(n), velocities(n);
            for (std::size_t i = 0; i < n; ++i) {
                shifted[i] = state[i].x + tau * state[i].v;
                velocities[i] = state[i].v;
            }
            const Eigen::MatrixXcd ex = phase_rows(shifted, g.xi_nodes);
            const Eigen::MatrixXcd ev = phase_rows(velocities, g.eta_nodes);
            Eigen::MatrixXcd p(nxi, static_cast<Eigen::Index>(n));
            p.noalias() = mul * ev.transpose();

            double step_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const cplx gv = (ex.row(static_cast<Eigen::Index>(i)) *
                                 p.col(static_cast<Eigen::Index>(i)))(0, 0);
                step_sum += conv[i] * gv.real();
            }
            drift_sum += path.config.dt * step_sum / static_cast<double>(n);
        }
        terms.drift = drift_sum;
    }

    terms.noise = duality_pairing(f_hat, z_field_at(acc, tk).field).real();
    return terms;
}

double mild_identity_residual(const EnsemblePath& path, const ZAccumulator& acc,
                              const SpectralField& f_hat, double t) {
    return mild_identity_terms(path, acc, f_hat, t).residual();
}

void write_zfield_csv(const ZField& zf, const std::string& file) {
    const FrequencyGrid& g = *zf.field.grid;
    std::ostringstream out;
    out << "t,xi,eta,re,im\n";
    for (std::size_t a = 0; a < g.n_xi(); ++a) {
        for (std::size_t b = 0; b < g.n_eta(); ++b) {
            const cplx z =
                zf.field.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            out << format_double(zf.t) << ',' << format_double(g.xi_nodes[a]) << ','
                << format_double(g.eta_nodes[b]) << ',' << format_double(z.real()) << ','
                << format_double(z.imag()) << '\n';
        }
    }
    atomic_write_file(file, out.str());
}

}  // namespace kinlab

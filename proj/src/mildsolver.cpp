#include "kinlab/mildsolver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "kinlab/errors.hpp"
#include "kinlab/norms.hpp"

namespace kinlab {

namespace {

using cplx = std::complex<double>;

RealField product(const RealField& a, const RealField& b) {
    if (!(a.grid() == b.grid()))
        throw std::invalid_argument("field product: operands on different grids");
    RealField out(a.grid());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

void axpy(RealField& y, double alpha, const RealField& x) {
    double* py = y.data();
    const double* px = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) py[i] += alpha * px[i];
}

std::vector<double> uniform_times(double T, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = T * static_cast<double>(k) / static_cast<double>(count - 1);
    return out;
}

// phase columns e^{i node * y} built by recurrence along the node axis
Eigen::MatrixXcd phase_columns(const std::vector<double>& ys, const double* nodes,
                               std::size_t count) {
    Eigen::MatrixXcd out(ys.size(), count);
    if (count == 0) return out;
    const double h = count > 1 ? nodes[1] - nodes[0] : 0.0;
    for (std::size_t r = 0; r < ys.size(); ++r) {
        cplx z = std::polar(1.0, nodes[0] * ys[r]);
        const cplx stepz = std::polar(1.0, h * ys[r]);
        for (std::size_t c = 0; c < count; ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = z;
            z *= stepz;
        }
    }
    return out;
}

}  // namespace

RealField discretize_density(const ProductMixtureDensity& density, const PhysicalGrid& grid) {
    RealField out(grid);
    out.fill([&density](double x, double v) { return density.density(x, v); });
    const double mass = out.integral();
    if (!(mass > 0.0)) throw std::invalid_argument("discretize_density: zero mass on the box");
    double* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) p[i] /= mass;
    return out;
}

SpectralField density_char(const RealField& nu, const GridPtr& grid) {
    const PhysicalGrid& pg = nu.grid();
    const FrequencyGrid& fg = *grid;
    const std::size_t a0 = fg.zero_xi_index();
    const std::size_t n_up = fg.n_xi() - a0;

    std::vector<double> xs(pg.nx), vs(pg.nv);
    for (std::size_t j = 0; j < pg.nx; ++j) xs[j] = pg.x_node(j);
    for (std::size_t k = 0; k < pg.nv; ++k) vs[k] = pg.v_node(k);

    // xi >= 0 rows only; the rest follows from conjugate symmetry of a real
    // density under the e^{+i} convention
    const Eigen::MatrixXcd wx = phase_columns(xs, fg.xi_nodes.data() + a0, n_up);
    const Eigen::MatrixXcd wv = phase_columns(vs, fg.eta_nodes.data(), fg.n_eta());

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        m(nu.data(), static_cast<Eigen::Index>(pg.nx), static_cast<Eigen::Index>(pg.nv));

    Eigen::MatrixXcd t1(n_up, pg.nv);
    t1.noalias() = wx.transpose() * m.cast<cplx>();
    Eigen::MatrixXcd upper(n_up, fg.n_eta());
    upper.noalias() = t1 * wv;
    upper *= pg.cell();

    SpectralField out(grid);
    out.values.bottomRows(static_cast<Eigen::Index>(n_up)) = upper;
    for (std::size_t a = 0; a < a0; ++a)
        for (std::size_t b = 0; b < fg.n_eta(); ++b)
            out.at(a, b) = std::conj(out.at(fg.n_xi() - 1 - a, fg.n_eta() - 1 - b));
    return out;
}

RealField meanfield_term(const RealField& nu, const InteractionKernel& kernel) {
    const PhysicalGrid& g = nu.grid();
    if (kernel.structure == InteractionKernel::Structure::zero) return RealField(g);
    if (kernel.structure == InteractionKernel::Structure::sine_mode) {
        // the sine kernel is box-periodic only when the box period is a
        // multiple of 2 pi
        if (std::fabs(std::remainder(g.Lx, M_PI)) > 1e-12 * std::max(1.0, g.Lx))
            throw std::domain_error("meanfield_term: sine kernel needs a 2 pi periodic box");
    } else {
        if (!(kernel.support_radius <= 0.5 * std::min(g.Lx, g.Lv)))
            throw std::domain_error("meanfield_term: kernel support exceeds half the box");
    }
    RealField ker(g);
    for (std::size_t p = 0; p < g.nx; ++p) {
        double dx = static_cast<double>(p) * g.dx();
        if (dx >= g.Lx) dx -= 2.0 * g.Lx;
        for (std::size_t q = 0; q < g.nv; ++q) {
            double dv = static_cast<double>(q) * g.dv();
            if (dv >= g.Lv) dv -= 2.0 * g.Lv;
            ker.at(p, q) = kernel(dx, dv);
        }
    }
    return periodic_convolve(nu, ker);
}

RealField meanfield_term_sine_exact(const RealField& nu, const InteractionKernel& kernel) {
    if (kernel.structure != InteractionKernel::Structure::sine_mode)
        throw std::invalid_argument("meanfield_term_sine_exact: kernel is not sine_mode");
    const PhysicalGrid& g = nu.grid();
    double c = 0.0, s = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j) {
        const double x = g.x_node(j);
        double col = 0.0;
        for (std::size_t k = 0; k < g.nv; ++k) col += nu.at(j, k);
        c += std::cos(x) * col;
        s += std::sin(x) * col;
    }
    c *= g.cell();
    s *= g.cell();
    const double amp = kernel.sine_amplitude;
    RealField out(g);
    out.fill([amp, c, s](double x, double) { return -amp * (std::sin(x) * c - std::cos(x) * s); });
    return out;
}

RealField step_mild(const RealField& nu, double dt, const InteractionKernel& kernel,
                    double sigma) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_mild: dt must be positive");
    const bool noise = sigma > 0.0;
    if (noise && std::fabs(sigma - std::sqrt(2.0)) > 1e-12)
        throw std::invalid_argument("step_mild: sigma must be 0 or sqrt(2)");
    if (kernel.structure == InteractionKernel::Structure::zero)
        return apply_forward_flow(nu, dt, noise);

    const RealField half = apply_forward_flow(nu, 0.5 * dt, noise);
    const RealField g0 = spectral_grad_v(product(nu, meanfield_term(nu, kernel)));
    RealField nu_half = half;
    axpy(nu_half, -0.5 * dt, apply_forward_flow(g0, 0.5 * dt, noise));

    const RealField gh = spectral_grad_v(product(nu_half, meanfield_term(nu_half, kernel)));
    RealField out = apply_forward_flow(half, 0.5 * dt, noise);
    axpy(out, -dt, apply_forward_flow(gh, 0.5 * dt, noise));
    return out;
}

const DensitySnapshot& MildRun::at_time(double t) const {
    for (const auto& s : snapshots)
        if (std::fabs(s.t - t) <= 1e-9 * std::max(1.0, std::fabs(t))) return s;
    throw std::invalid_argument("MildRun: no snapshot at requested time");
}

MildRun solve(const RealField& nu0, double T, const InteractionKernel& kernel,
              const SolverOptions& options) {
    if (!(T >= 0.0)) throw std::invalid_argument("solve: T must be nonnegative");
    if (!(options.dt > 0.0)) throw std::invalid_argument("solve: dt must be positive");
    if (std::fabs(nu0.integral() - 1.0) > 1e-8)
        throw std::invalid_argument("solve: initial density must have unit mass");

    MildRun run;
    run.options = options;
    if (run.options.snapshot_times.empty())
        run.options.snapshot_times = uniform_times(T, options.snapshot_count);
    const auto& times = run.options.snapshot_times;
    if (times.front() != 0.0 || std::fabs(times.back() - T) > 1e-12 * std::max(1.0, T))
        throw std::invalid_argument("solve: snapshot times must span [0, T]");

    RealField nu = nu0;
    double mass_tol = 1e-10;
    const auto record = [&](double t) {
        DensitySnapshot snap;
        snap.t = t;
        if (run.options.record_density) snap.density = nu;
        if (run.options.freq_grid) snap.nu_hat = density_char(nu, run.options.freq_grid);
        if (std::fabs(nu.integral() - 1.0) > mass_tol)
            throw ContractViolation("solve: mass conservation breached at a snapshot");
        run.snapshots.push_back(std::move(snap));
    };

    const double peak0 = nu.max_abs();
    record(times.front());
    for (std::size_t seg = 0; seg + 1 < times.size(); ++seg) {
        const double span = times[seg + 1] - times[seg];
        if (!(span > 0.0)) throw std::invalid_argument("solve: snapshot times must increase");
        const auto steps = static_cast<std::size_t>(std::llround(span / options.dt));
        if (steps == 0 ||
            std::fabs(static_cast<double>(steps) * options.dt - span) > 1e-9 * std::max(1.0, span))
            throw std::invalid_argument("solve: snapshot spacing must be a multiple of dt");
        for (std::size_t s = 0; s < steps; ++s) {
            nu = step_mild(nu, options.dt, kernel, options.sigma);
            if (!nu.all_finite()) throw ContractViolation("solve: non-finite solver state");
            if (nu.boundary_mass_fraction(0.1) > options.boundary_mass_limit)
                throw ContractViolation("solve: boundary mass monitor breached");
            if (nu.min_value() < -1e-8 * std::max(peak0, nu.max_abs()))
                run.positivity_flagged = true;
        }
        record(times[seg + 1]);
    }
    return run;
}

PicardResult picard_iterate(const RealField& nu0, double T, const InteractionKernel& kernel,
                            const PicardOptions& options) {
    if (!options.freq_grid)
        throw std::invalid_argument("picard_iterate: a frequency grid is required");
    if (!(T > 0.0) || options.coarse_steps < 2)
        throw std::invalid_argument("picard_iterate: need T > 0 and at least 2 coarse steps");
    const bool noise = options.sigma > 0.0;
    const std::size_t j_count = options.coarse_steps + 1;
    const double delta = T / static_cast<double>(options.coarse_steps);

    std::vector<double> taus(j_count);
    for (std::size_t j = 0; j < j_count; ++j) taus[j] = delta * static_cast<double>(j);

    std::vector<RealField> base(j_count);
    for (std::size_t j = 0; j < j_count; ++j) base[j] = apply_forward_flow(nu0, taus[j], noise);

    std::vector<RealField> cur(j_count);
    for (std::size_t j = 0; j < j_count; ++j)
        cur[j] = options.start == PicardStart::free_flow ? base[j] : nu0;

    std::vector<SpectralField> cur_hat;
    cur_hat.reserve(j_count);
    for (std::size_t j = 0; j < j_count; ++j)
        cur_hat.push_back(density_char(cur[j], options.freq_grid));

    PicardResult result;
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        std::vector<RealField> g(j_count);
        for (std::size_t r = 0; r < j_count; ++r)
            g[r] = spectral_grad_v(product(cur[r], meanfield_term(cur[r], kernel)));

        std::vector<RealField> next(j_count);
        next[0] = nu0;
        for (std::size_t j = 1; j < j_count; ++j) {
            RealField acc = base[j];
            for (std::size_t r = 0; r <= j; ++r) {
                const double w = (r == 0 || r == j) ? 0.5 : 1.0;  // trapezoid in r
                axpy(acc, -delta * w, apply_forward_flow(g[r], taus[j] - taus[r], noise));
            }
            next[j] = std::move(acc);
        }

        double residual = 0.0;
        std::vector<SpectralField> next_hat;
        next_hat.reserve(j_count);
        for (std::size_t j = 0; j < j_count; ++j) {
            next_hat.push_back(density_char(next[j], options.freq_grid));
            residual = std::max(
                residual, dual_norm(field_difference(next_hat[j], cur_hat[j]), options.order));
        }
        cur = std::move(next);
        cur_hat = std::move(next_hat);
        result.residual_history.push_back(residual);
        if (residual < options.tol) {
            result.converged = true;
            break;
        }
    }

    result.run.options.dt = delta;
    result.run.options.sigma = options.sigma;
    result.run.options.freq_grid = options.freq_grid;
    result.run.options.snapshot_times = taus;
    for (std::size_t j = 0; j < j_count; ++j) {
        DensitySnapshot snap;
        snap.t = taus[j];
        snap.density = cur[j];
        snap.nu_hat = cur_hat[j];
        result.run.snapshots.push_back(std::move(snap));
    }
    return result;
}

}  // namespace kinlab

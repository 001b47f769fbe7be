#include "kinlab/semigroup.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "kinlab/gaussian_calculus.hpp"
#include "kinlab/norms.hpp"
#include "kinlab/rng.hpp"

namespace kinlab {

double kernel_G(double t, double xi, double eta) {
    if (t < 0.0) throw std::invalid_argument("kernel_G: t must be nonnegative");
    const double expo = -(t * t * t / 3.0) * xi * xi - t * t * xi * eta - t * eta * eta;
    return std::exp(expo);
}

double density_pt(double t, double x, double v) {
    if (t <= 0.0) throw std::invalid_argument("density_pt: t must be positive");
    const double a = 3.0 * x - 2.0 * t * v;
    const double expo = -(3.0 * x * x + a * a) / (4.0 * t * t * t);
    const double norm = 1.0 / (2.0 * M_PI * std::sqrt(t * t * t * t / 3.0));
    return norm * std::exp(expo);
}

bool kernel_time_regularity_check(double r, double u, double t, double xi, double eta) {
    if (!(0.0 <= r && r <= u && u <= t))
        throw std::invalid_argument("kernel_time_regularity_check: need 0 <= r <= u <= t");
    const double lhs = std::fabs(kernel_G(t - r, xi, eta) - kernel_G(u - r, xi, eta));
    const double rhs = 0.25 * eta * eta * (t - u);
    return lhs <= rhs;
}

PhysicalGrid PhysicalGrid::make(double Lx, double Lv, std::size_t nx, std::size_t nv) {
    if (!(Lx > 0.0 && Lv > 0.0))
        throw std::invalid_argument("PhysicalGrid: box half-widths must be positive");
    const auto pow2 = [](std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; };
    if (!pow2(nx) || !pow2(nv))
        throw std::invalid_argument("PhysicalGrid: sizes must be powers of two");
    return PhysicalGrid{Lx, Lv, nx, nv};
}

double PhysicalGrid::xi_mode(std::size_t a) const {
    const auto half = nx / 2;
    const double k = a < half ? static_cast<double>(a)
                              : static_cast<double>(a) - static_cast<double>(nx);
    return k * M_PI / Lx;
}

double PhysicalGrid::eta_mode(std::size_t b) const {
    const auto half = nv / 2;
    const double k = b < half ? static_cast<double>(b)
                              : static_cast<double>(b) - static_cast<double>(nv);
    return k * M_PI / Lv;
}

bool operator==(const PhysicalGrid& a, const PhysicalGrid& b) {
    return a.Lx == b.Lx && a.Lv == b.Lv && a.nx == b.nx && a.nv == b.nv;
}

void RealField::fill(const std::function<double(double, double)>& f) {
    for (std::size_t j = 0; j < grid_.nx; ++j) {
        const double x = grid_.x_node(j);
        for (std::size_t k = 0; k < grid_.nv; ++k) vals_[j * grid_.nv + k] = f(x, grid_.v_node(k));
    }
}

double RealField::integral() const {
    double s = 0.0;
    for (double v : vals_) s += v;
    return s * grid_.cell();
}

double RealField::max_abs() const {
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::fabs(v));
    return m;
}

bool RealField::all_finite() const {
    for (double v : vals_)
        if (!std::isfinite(v)) return false;
    return true;
}

double RealField::min_value() const {
    double m = vals_.empty() ? 0.0 : vals_[0];
    for (double v : vals_) m = std::min(m, v);
    return m;
}

double RealField::boundary_mass_fraction(double frame) const {
    const auto wx = static_cast<std::size_t>(std::ceil(frame * static_cast<double>(grid_.nx)));
    const auto wv = static_cast<std::size_t>(std::ceil(frame * static_cast<double>(grid_.nv)));
    double frame_sum = 0.0, total = 0.0;
    for (std::size_t j = 0; j < grid_.nx; ++j)
        for (std::size_t k = 0; k < grid_.nv; ++k) {
            const double a = std::fabs(vals_[j * grid_.nv + k]);
            total += a;
            const bool outer = j < wx || j >= grid_.nx - wx || k < wv || k >= grid_.nv - wv;
            if (outer) frame_sum += a;
        }
    return total > 0.0 ? frame_sum / total : 0.0;
}

namespace {

using cplx = std::complex<double>;

// All transform state for one grid size: a scratch buffer pair and the plan
// set. Access is serialized by the module mutex; plans use FFTW_ESTIMATE so
// planning is deterministic and cheap.
class Workspace {
 public:
    Workspace(std::size_t nx, std::size_t nv)
        : nx_(nx), nv_(nv), buf_(nx * nv), buf2_(nx * nv) {
        auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
        auto* q = reinterpret_cast<fftw_complex*>(buf2_.data());
        const int inx = static_cast<int>(nx), inv = static_cast<int>(nv);
        fwd2_ = fftw_plan_dft_2d(inx, inv, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd2_ = fftw_plan_dft_2d(inx, inv, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
        fwd2_b_ = fftw_plan_dft_2d(inx, inv, q, q, FFTW_FORWARD, FFTW_ESTIMATE);
        int nvd[1] = {inv};
        fwd_v_ = fftw_plan_many_dft(1, nvd, inx, p, nullptr, 1, inv, p, nullptr, 1, inv,
                                    FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_v_ = fftw_plan_many_dft(1, nvd, inx, p, nullptr, 1, inv, p, nullptr, 1, inv,
                                    FFTW_BACKWARD, FFTW_ESTIMATE);
        int nxd[1] = {inx};
        fwd_x_ = fftw_plan_many_dft(1, nxd, inv, p, nullptr, inv, 1, p, nullptr, inv, 1,
                                    FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_x_ = fftw_plan_many_dft(1, nxd, inv, p, nullptr, inv, 1, p, nullptr, inv, 1,
                                    FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    ~Workspace() {
        fftw_destroy_plan(fwd2_);
        fftw_destroy_plan(bwd2_);
        fftw_destroy_plan(fwd2_b_);
        fftw_destroy_plan(fwd_v_);
        fftw_destroy_plan(bwd_v_);
        fftw_destroy_plan(fwd_x_);
        fftw_destroy_plan(bwd_x_);
    }

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    void load(const RealField& f) {
        const double* src = f.data();
        for (std::size_t i = 0; i < buf_.size(); ++i) buf_[i] = cplx(src[i], 0.0);
    }

    void load2(const RealField& f) {
        const double* src = f.data();
        for (std::size_t i = 0; i < buf2_.size(); ++i) buf2_[i] = cplx(src[i], 0.0);
    }

    RealField unload(const PhysicalGrid& g, double scale) const {
        RealField out(g);
        double* dst = out.data();
        for (std::size_t i = 0; i < buf_.size(); ++i) dst[i] = buf_[i].real() * scale;
        return out;
    }

    cplx& at(std::size_t a, std::size_t b) { return buf_[a * nv_ + b]; }
    cplx& at2(std::size_t a, std::size_t b) { return buf2_[a * nv_ + b]; }

    void fwd2() { fftw_execute(fwd2_); }
    void bwd2() { fftw_execute(bwd2_); }
    void fwd2_second() { fftw_execute(fwd2_b_); }
    void fwd_v() { fftw_execute(fwd_v_); }
    void bwd_v() { fftw_execute(bwd_v_); }
    void fwd_x() { fftw_execute(fwd_x_); }
    void bwd_x() { fftw_execute(bwd_x_); }

    std::size_t nx_, nv_;
    std::vector<cplx> buf_, buf2_;

 private:
    fftw_plan fwd2_, bwd2_, fwd2_b_, fwd_v_, bwd_v_, fwd_x_, bwd_x_;
};

std::mutex& spectral_mutex() {
    static std::mutex m;
    return m;
}

Workspace& acquire(const PhysicalGrid& g) {
    static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Workspace>> cache;
    auto key = std::make_pair(g.nx, g.nv);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<Workspace>(g.nx, g.nv)).first;
    return *it->second;
}

// Rejects the call if any entry of |buf| above a relative floor would be
// carried past the eta Nyquist line by the shear eta -> eta + t xi.
void check_shear_band(Workspace& ws, const PhysicalGrid& g, double t_xi_sign) {
    double peak = 0.0;
    for (const cplx& z : ws.buf_) peak = std::max(peak, std::abs(z));
    if (peak == 0.0) return;
    const double tol = 1e-12 * peak;
    const double eta_nyq = M_PI / g.Lv * static_cast<double>(g.nv / 2);
    for (std::size_t a = 0; a < g.nx; ++a) {
        const double shift = t_xi_sign * g.xi_mode(a);
        for (std::size_t b = 0; b < g.nv; ++b) {
            if (std::abs(ws.at(a, b)) <= tol) continue;
            if (std::fabs(g.eta_mode(b) + shift) > eta_nyq + 1e-9)
                throw std::domain_error(
                    "transport shear exceeds the velocity frequency band of the grid");
        }
    }
}

// Shared backward-path core: multiply fhat by `mult`, then realize the output
// transform value at (xi, eta) as multiplied-fhat(xi, eta - t xi) through an
// exact phase in the mixed representation.
RealField backward_flow(const RealField& f, double t,
                        const std::function<cplx(double, double)>& mult) {
    const PhysicalGrid& g = f.grid();
    std::lock_guard<std::mutex> lk(spectral_mutex());
    Workspace& ws = acquire(g);
    ws.load(f);
    ws.fwd2();
    for (std::size_t a = 0; a < g.nx; ++a) {
        const double xi = g.xi_mode(a);
        for (std::size_t b = 0; b < g.nv; ++b) ws.at(a, b) *= mult(xi, g.eta_mode(b));
    }
    check_shear_band(ws, g, t);
    ws.bwd_v();
    for (std::size_t a = 0; a < g.nx; ++a) {
        const double xi = g.xi_mode(a);
        for (std::size_t k = 0; k < g.nv; ++k)
            ws.at(a, k) *= std::polar(1.0, t * xi * g.v_node(k));
    }
    ws.bwd_x();
    return ws.unload(g, 1.0 / static_cast<double>(g.size()));
}

}  // namespace

RealField apply_Pt_function(const RealField& f, double t) {
    if (t < 0.0) throw std::invalid_argument("apply_Pt_function: t must be nonnegative");
    if (!f.all_finite()) throw std::invalid_argument("apply_Pt_function: field not finite");
    if (t == 0.0) return f;
    return backward_flow(f, t, [t](double xi, double eta) {
        return cplx(kernel_G(t, xi, eta), 0.0);
    });
}

RealField grad_v_Pt_function(const RealField& f, double t) {
    if (t < 0.0) throw std::invalid_argument("grad_v_Pt_function: t must be nonnegative");
    if (t == 0.0) return spectral_grad_v(f);
    // i (eta + t xi) G(t, xi, eta) in pre-shear coordinates equals i eta' at
    // the output frequency eta' = eta + t xi
    return backward_flow(f, t, [t](double xi, double eta) {
        return cplx(0.0, eta + t * xi) * kernel_G(t, xi, eta);
    });
}

RealField spectral_grad_v(const RealField& f) {
    const PhysicalGrid& g = f.grid();
    std::lock_guard<std::mutex> lk(spectral_mutex());
    Workspace& ws = acquire(g);
    ws.load(f);
    ws.fwd2();
    for (std::size_t a = 0; a < g.nx; ++a)
        for (std::size_t b = 0; b < g.nv; ++b) ws.at(a, b) *= cplx(0.0, g.eta_mode(b));
    ws.bwd2();
    return ws.unload(g, 1.0 / static_cast<double>(g.size()));
}

RealField apply_forward_flow(const RealField& density, double t, bool with_noise) {
    if (t < 0.0) throw std::invalid_argument("apply_forward_flow: t must be nonnegative");
    if (t == 0.0) return density;
    const PhysicalGrid& g = density.grid();
    std::lock_guard<std::mutex> lk(spectral_mutex());
    Workspace& ws = acquire(g);
    ws.load(density);
    ws.fwd2();
    // source-side shear: content at (xi, eta) lands at eta - t xi
    check_shear_band(ws, g, -t);
    ws.bwd_v();
    for (std::size_t a = 0; a < g.nx; ++a) {
        const double xi = g.xi_mode(a);
        for (std::size_t k = 0; k < g.nv; ++k)
            ws.at(a, k) *= std::polar(1.0, -t * xi * g.v_node(k));
    }
    ws.fwd_v();
    if (with_noise) {
        for (std::size_t a = 0; a < g.nx; ++a) {
            const double xi = g.xi_mode(a);
            for (std::size_t b = 0; b < g.nv; ++b)
                ws.at(a, b) *= kernel_G(t, xi, g.eta_mode(b));
        }
    }
    ws.bwd2();
    // one extra unnormalized bwd/fwd pair along v contributes a factor nv
    const double scale = 1.0 / (static_cast<double>(g.size()) * static_cast<double>(g.nv));
    return ws.unload(g, scale);
}

RealField periodic_convolve(const RealField& f, const RealField& kernel_by_index) {
    if (!(f.grid() == kernel_by_index.grid()))
        throw std::invalid_argument("periodic_convolve: operands on different grids");
    const PhysicalGrid& g = f.grid();
    std::lock_guard<std::mutex> lk(spectral_mutex());
    Workspace& ws = acquire(g);
    ws.load(f);
    ws.load2(kernel_by_index);
    ws.fwd2();
    ws.fwd2_second();
    for (std::size_t i = 0; i < g.size(); ++i) ws.buf_[i] *= ws.buf2_[i];
    ws.bwd2();
    return ws.unload(g, g.cell() / static_cast<double>(g.size()));
}

SpectralField apply_Pt_measure(const std::vector<KineticPoint>& points,
                               const std::vector<double>& masses,
                               const GridPtr& grid, double t) {
    if (t < 0.0) throw std::invalid_argument("apply_Pt_measure: t must be nonnegative");
    std::vector<KineticPoint> moved(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        moved[i] = KineticPoint{points[i].x + t * points[i].v, points[i].v};
    SpectralField out = measure_char(moved, masses, grid);
    for (std::size_t a = 0; a < grid->n_xi(); ++a) {
        const double xi = grid->xi_nodes[a];
        for (std::size_t b = 0; b < grid->n_eta(); ++b)
            out.at(a, b) *= kernel_G(t, xi, grid->eta_nodes[b]);
    }
    return out;
}

SpectralField apply_Pt_measure(const SpectralField& nu_hat, double t) {
    if (t < 0.0) throw std::invalid_argument("apply_Pt_measure: t must be nonnegative");
    if (t == 0.0) return nu_hat;
    const FrequencyGrid& g = *nu_hat.grid;
    const double ratio = t * g.h_xi() / g.h_eta();
    const auto shift_per_mode = static_cast<long>(std::llround(ratio));
    if (std::fabs(ratio - static_cast<double>(shift_per_mode)) > 1e-9)
        throw std::invalid_argument(
            "apply_Pt_measure: shear t*h_xi/h_eta must be an integer on this grid");
    double peak = 1.0;
    for (std::size_t a = 0; a < g.n_xi(); ++a)
        for (std::size_t b = 0; b < g.n_eta(); ++b)
            peak = std::max(peak, std::abs(nu_hat.at(a, b)));

    const long a0 = static_cast<long>(g.zero_xi_index());
    SpectralField out(nu_hat.grid);
    for (std::size_t a = 0; a < g.n_xi(); ++a) {
        const double xi = g.xi_nodes[a];
        const long shift = (static_cast<long>(a) - a0) * shift_per_mode;
        for (std::size_t b = 0; b < g.n_eta(); ++b) {
            const double gk = kernel_G(t, xi, g.eta_nodes[b]);
            const long bs = static_cast<long>(b) + shift;
            if (bs >= 0 && bs < static_cast<long>(g.n_eta())) {
                out.at(a, b) = gk * nu_hat.at(a, static_cast<std::size_t>(bs));
            } else if (gk * peak <= 1e-12) {
                out.at(a, b) = 0.0;
            } else {
                throw std::domain_error(
                    "apply_Pt_measure: sheared source leaves the grid where the kernel "
                    "is not negligible");
            }
        }
    }
    return out;
}

McEstimate semigroup_mc_oracle(const std::function<double(double, double)>& f,
                               const KineticPoint& p, double t,
                               std::size_t n, std::uint64_t seed) {
    if (n < 100) throw std::invalid_argument("semigroup_mc_oracle: need n >= 100");
    if (t < 0.0) throw std::invalid_argument("semigroup_mc_oracle: t must be nonnegative");
    if (t == 0.0) return McEstimate{f(p.x, p.v), 0.0};
    KineticGaussian kg(t);
    Rng rng(seed);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [gx, gv] = kg.sample(rng);
        const double y = f(p.x + t * p.v + gx, p.v + gv);
        const double delta = y - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (y - mean);
    }
    const double var = m2 / static_cast<double>(n - 1);
    return McEstimate{mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

}  // namespace kinlab

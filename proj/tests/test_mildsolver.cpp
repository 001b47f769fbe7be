#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "doctest.h"
#include "kinlab/errors.hpp"
#include "kinlab/gaussian_calculus.hpp"
#include "kinlab/mildsolver.hpp"
#include "kinlab/norms.hpp"
#include "kinlab/particles.hpp"
#include "kinlab/rng.hpp"
#include "kinlab/semigroup.hpp"

using namespace kinlab;

namespace {

RealField default_density_on(const PhysicalGrid& grid) {
    return discretize_density(default_initial_density(), grid);
}

double sup_diff(const RealField& a, const RealField& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < a.grid().nx; ++j)
        for (std::size_t k = 0; k < a.grid().nv; ++k)
            worst = std::max(worst, std::fabs(a.at(j, k) - b.at(j, k)));
    return worst;
}

double mixture_push_density(const std::vector<Gaussian2D>& comps, double t, bool noise,
                            double x, double v) {
    double acc = 0.0;
    for (const auto& g : comps) acc += g.kinetic_push(t, noise).density(x, v);
    return acc;
}

}  // namespace

TEST_CASE("discretized initial density has exact unit mass") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    CHECK(std::fabs(nu.integral() - 1.0) < 1e-14);
    CHECK(nu.min_value() >= 0.0);
    CHECK(nu.all_finite());
    CHECK(nu.boundary_mass_fraction() < 1e-10);
}

TEST_CASE("grid characteristic function matches the mixture closed form") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    const auto freq = FrequencyGrid::make(4.0, 4.0, 17, 17);
    const auto hat = density_char(nu, freq);
    const auto comps = default_initial_density().components();
    double worst = 0.0;
    for (std::size_t a = 0; a < freq->n_xi(); ++a)
        for (std::size_t b = 0; b < freq->n_eta(); ++b) {
            std::complex<double> exact(0.0, 0.0);
            for (const auto& g : comps) exact += g.char_at(freq->xi_nodes[a], freq->eta_nodes[b]);
            worst = std::max(worst, std::abs(hat.at(a, b) - exact));
        }
    CHECK(worst < 1e-10);
    CHECK(std::abs(hat.at(freq->zero_xi_index(), freq->zero_eta_index()) - 1.0) < 1e-13);
}

TEST_CASE("mean-field force: spectral, exact two-mode, and brute sums agree") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    const auto k1 = InteractionKernel::kuramoto(0.5);
    const auto spectral = meanfield_term(nu, k1);
    const auto exact = meanfield_term_sine_exact(nu, k1);
    CHECK(sup_diff(spectral, exact) < 1e-8);

    // brute-force circular sum on a coarse grid, every entry
    const auto small = PhysicalGrid::make(2.0 * M_PI, 2.0 * M_PI, 32, 32);
    const auto nus = default_density_on(small);
    const auto force = meanfield_term(nus, k1);
    const double period_x = 2.0 * small.Lx;
    double worst = 0.0;
    for (std::size_t j = 0; j < small.nx; ++j)
        for (std::size_t k = 0; k < small.nv; ++k) {
            double acc = 0.0;
            for (std::size_t p = 0; p < small.nx; ++p)
                for (std::size_t q = 0; q < small.nv; ++q) {
                    double dx = small.x_node(j) - small.x_node(p);
                    dx -= period_x * std::round(dx / period_x);
                    acc += k1(dx, small.v_node(k) - small.v_node(q)) * nus.at(p, q);
                }
            worst = std::max(worst, std::fabs(force.at(j, k) - acc * small.cell()));
        }
    CHECK(worst < 1e-10);
}

TEST_CASE("mean-field force handles a compactly supported generic kernel") {
    InteractionKernel compact;
    compact.gamma = [](double dx, double dv) {
        const double r2 = dx * dx + dv * dv;
        return r2 < 4.0 ? 0.3 * std::exp(-1.0 / (4.0 - r2)) * dv : 0.0;
    };
    compact.bound = 0.3;
    compact.lipschitz = 1.0;
    compact.name = "compact";
    compact.structure = InteractionKernel::Structure::generic;
    compact.support_radius = 2.0;

    const auto small = PhysicalGrid::make(2.0 * M_PI, 2.0 * M_PI, 32, 32);
    const auto nus = default_density_on(small);
    const auto force = meanfield_term(nus, compact);
    const double px = 2.0 * small.Lx, pv = 2.0 * small.Lv;
    double worst = 0.0;
    for (std::size_t j = 0; j < small.nx; j += 5)
        for (std::size_t k = 0; k < small.nv; k += 5) {
            double acc = 0.0;
            for (std::size_t p = 0; p < small.nx; ++p)
                for (std::size_t q = 0; q < small.nv; ++q) {
                    double dx = small.x_node(j) - small.x_node(p);
                    double dv = small.v_node(k) - small.v_node(q);
                    dx -= px * std::round(dx / px);
                    dv -= pv * std::round(dv / pv);
                    acc += compact(dx, dv) * nus.at(p, q);
                }
            worst = std::max(worst, std::fabs(force.at(j, k) - acc * small.cell()));
        }
    CHECK(worst < 1e-10);
}

TEST_CASE("mean-field force rejects unsupported kernel and box combinations") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 64, 64);
    const auto nu = default_density_on(grid);
    CHECK_THROWS_AS(meanfield_term(nu, InteractionKernel::alignment(0.5)), std::domain_error);
    const auto off = PhysicalGrid::make(10.0, 10.0, 64, 64);  // period not a 2 pi multiple
    const auto nu_off = default_density_on(off);
    CHECK_THROWS_AS(meanfield_term(nu_off, InteractionKernel::kuramoto(0.5)), std::domain_error);
}

TEST_CASE("one mild step: zero kernel is the pure flow, mass is conserved") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    const double dt = 1.0 / 32.0;
    const auto flow = apply_forward_flow(nu, dt, true);
    const auto stepd = step_mild(nu, dt, InteractionKernel::zero(), std::sqrt(2.0));
    CHECK(sup_diff(stepd, flow) == 0.0);

    const auto kstep = step_mild(nu, dt, InteractionKernel::kuramoto(0.5), std::sqrt(2.0));
    CHECK(std::fabs(kstep.integral() - nu.integral()) < 1e-12);
    CHECK_THROWS_AS(step_mild(nu, dt, InteractionKernel::kuramoto(0.5), 1.0),
                    std::invalid_argument);
}

TEST_CASE("noisy free flow solve matches the Gaussian closed form") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    SolverOptions opt;
    opt.dt = 1.0 / 16.0;
    opt.snapshot_times = {0.0, 0.25, 0.5};
    const auto run = solve(nu, 0.5, InteractionKernel::zero(), opt);
    const auto comps = default_initial_density().components();
    for (double t : {0.25, 0.5}) {
        const auto& snap = run.at_time(t);
        double worst = 0.0;
        for (std::size_t j = 0; j < grid.nx; ++j)
            for (std::size_t k = 0; k < grid.nv; ++k)
                worst = std::max(worst, std::fabs(snap.density.at(j, k) -
                                                  mixture_push_density(comps, t, true,
                                                                       grid.x_node(j),
                                                                       grid.v_node(k))));
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("deterministic free transport solve follows the characteristics") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    SolverOptions opt;
    opt.dt = 1.0 / 16.0;
    opt.sigma = 0.0;
    opt.snapshot_times = {0.0, 0.5};
    const auto run = solve(nu, 0.5, InteractionKernel::zero(), opt);
    const auto comps = default_initial_density().components();
    const auto& snap = run.at_time(0.5);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.nx; ++j)
        for (std::size_t k = 0; k < grid.nv; ++k)
            worst = std::max(worst, std::fabs(snap.density.at(j, k) -
                                              mixture_push_density(comps, 0.5, false,
                                                                   grid.x_node(j),
                                                                   grid.v_node(k))));
    CHECK(worst < 1e-10);
}

TEST_CASE("interacting solve is second order in dt") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    const auto k1 = InteractionKernel::kuramoto(0.5);
    auto final_density = [&](double dt) {
        SolverOptions opt;
        opt.dt = dt;
        opt.snapshot_times = {0.0, 0.25};
        return solve(nu, 0.25, k1, opt).at_time(0.25).density;
    };
    const auto a = final_density(1.0 / 32.0);
    const auto b = final_density(1.0 / 64.0);
    const auto c = final_density(1.0 / 128.0);
    const double d1 = sup_diff(a, b);
    const double d2 = sup_diff(b, c);
    CHECK(d1 > 0.0);
    const double ratio = d1 / d2;
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
}

TEST_CASE("weak coupling stays close to the free solution") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    SolverOptions opt;
    opt.dt = 1.0 / 32.0;
    opt.snapshot_times = {0.0, 1.0};
    const auto free_run = solve(nu, 1.0, InteractionKernel::zero(), opt);
    const auto weak_run = solve(nu, 1.0, InteractionKernel::kuramoto(0.1), opt);
    const double scale = free_run.at_time(1.0).density.max_abs();
    const double gap = sup_diff(free_run.at_time(1.0).density, weak_run.at_time(1.0).density);
    CHECK(gap > 0.0);
    CHECK(gap < 0.1 * scale);
}

TEST_CASE("solve rejects bad snapshot requests and leaky boxes") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    SolverOptions opt;
    opt.dt = 1.0 / 32.0;
    opt.snapshot_times = {0.0, 0.1, 0.5};  // 0.1 is not a multiple of dt
    CHECK_THROWS_AS(solve(nu, 0.5, InteractionKernel::zero(), opt), std::invalid_argument);
    opt.snapshot_times = {0.25, 0.5};  // does not start at 0
    CHECK_THROWS_AS(solve(nu, 0.5, InteractionKernel::zero(), opt), std::invalid_argument);

    // the monitor limit is configurable; set it below the honest boundary
    // fraction of the default law so the monitor itself fires
    SolverOptions lop;
    lop.dt = 1.0 / 32.0;
    lop.snapshot_times = {0.0, 0.25};
    lop.boundary_mass_limit = 1e-40;
    CHECK_THROWS_AS(solve(nu, 0.25, InteractionKernel::zero(), lop), ContractViolation);

    SolverOptions ok;
    ok.dt = 1.0 / 32.0;
    ok.snapshot_times = {0.0, 0.25};
    const auto run = solve(nu, 0.25, InteractionKernel::zero(), ok);
    CHECK_NOTHROW(run.at_time(0.25 + 1e-12));
    CHECK_THROWS_AS(run.at_time(0.125), std::invalid_argument);
}

TEST_CASE("picard iteration: free flow is a fixed point, starts agree, matches solve") {
    const auto grid = PhysicalGrid::make(4.0 * M_PI, 4.0 * M_PI, 128, 128);
    const auto nu = default_density_on(grid);
    const auto freq = FrequencyGrid::make(16.0, 16.0, 65, 65);
    const SobolevOrder order{6.0, 1};

    PicardOptions popt;
    popt.freq_grid = freq;
    popt.coarse_steps = 8;
    const auto zero_run = picard_iterate(nu, 0.25, InteractionKernel::zero(), popt);
    CHECK(zero_run.converged);
    CHECK(zero_run.residual_history.size() <= 2);

    const auto k1 = InteractionKernel::kuramoto(0.5);
    auto pa = popt;
    pa.start = PicardStart::free_flow;
    auto pb = popt;
    pb.start = PicardStart::frozen_initial;
    const auto ra = picard_iterate(nu, 0.25, k1, pa);
    const auto rb = picard_iterate(nu, 0.25, k1, pb);
    CHECK(ra.converged);
    CHECK(rb.converged);
    const auto& ha = ra.run.snapshots.back().nu_hat;
    const auto& hb = rb.run.snapshots.back().nu_hat;
    REQUIRE(ha.has_value());
    REQUIRE(hb.has_value());
    CHECK(dual_norm(field_difference(*ha, *hb), order) < 2.0 * popt.tol);

    SolverOptions sopt;
    sopt.dt = 1.0 / 64.0;
    sopt.snapshot_times = {0.0, 0.25};
    sopt.freq_grid = freq;
    sopt.record_density = false;
    const auto fine = solve(nu, 0.25, k1, sopt);
    const auto& hf = fine.at_time(0.25).nu_hat;
    REQUIRE(hf.has_value());
    // picard tol plus the coarse Duhamel quadrature error of the iteration
    CHECK(dual_norm(field_difference(*ha, *hf), order) < 10.0 * popt.tol);
}

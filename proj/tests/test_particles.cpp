#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "kinlab/frequency_grid.hpp"
#include "kinlab/particles.hpp"
#include "kinlab/rng.hpp"

using namespace kinlab;

namespace {

std::string tmp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<KineticPoint> random_state(std::size_t n, Rng& rng) {
    std::vector<KineticPoint> out(n);
    for (auto& p : out) {
        p.x = rng.uniform(-10.0, 10.0);
        p.v = rng.uniform(-3.0, 3.0);
    }
    return out;
}

}  // namespace

TEST_CASE("snapshot index rule") {
    const auto idx = snapshot_index_set(128, 33);
    REQUIRE(idx.size() == 33);
    CHECK(idx.front() == 0);
    CHECK(idx.back() == 128);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        CHECK(idx[k] == static_cast<std::size_t>(std::llround(k * 128.0 / 32.0)));
        if (k > 0) CHECK(idx[k] > idx[k - 1]);
    }
    CHECK(snapshot_index_set(10, 2) == std::vector<std::size_t>{0, 10});
    CHECK(snapshot_index_set(4, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(snapshot_index_set(10, 1), std::invalid_argument);
    CHECK_THROWS_AS(snapshot_index_set(10, 12), std::invalid_argument);
}

TEST_CASE("kuramoto drift hand value, zero sum, fast path agreement") {
    const auto k05 = InteractionKernel::kuramoto(0.5);
    const std::vector<KineticPoint> two = {{0.0, 1.0}, {M_PI / 2.0, -1.0}};
    const auto d2 = drift_pairwise(two, k05);
    // (1/2) * (-0.5) * sin(0 - pi/2) = +0.25 and the mirror term
    CHECK(d2[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(d2[1] == doctest::Approx(-0.25).epsilon(1e-14));

    // gamma is odd in dx, so the total interaction force vanishes
    Rng rng(411);
    const auto state = random_state(257, rng);
    const auto fast = drift_pairwise(state, InteractionKernel::kuramoto(0.7));
    double total = 0.0;
    for (double d : fast) total += d;
    CHECK(std::fabs(total) < 1e-11);

    const auto ref = drift_pairwise_reference(state, InteractionKernel::kuramoto(0.7));
    double gap = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i) gap = std::max(gap, std::fabs(fast[i] - ref[i]));
    CHECK(gap < 1e-10);

    const auto zeros = drift_pairwise(state, InteractionKernel::zero());
    for (double d : zeros) CHECK(d == 0.0);

    // generic kernels fall through to the reference loop verbatim
    const auto align = InteractionKernel::alignment(0.8);
    const auto da = drift_pairwise(state, align);
    const auto dr = drift_pairwise_reference(state, align);
    for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == dr[i]);

    CHECK_THROWS_AS(drift_pairwise({}, k05), std::invalid_argument);
    const std::vector<KineticPoint> bad = {{0.0, std::nan("")}};
    CHECK_THROWS_AS(drift_pairwise(bad, k05), std::invalid_argument);
}

TEST_CASE("joint increment moments match the kinetic covariance") {
    Rng rng(9104);
    const double dt = 0.25;
    const std::size_t n = 200000;
    double sb = 0.0, si = 0.0, sbb = 0.0, sii = 0.0, sbi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double db = 0.0, di = 0.0;
        draw_increment(rng, dt, db, di);
        sb += db;
        si += di;
        sbb += db * db;
        sii += di * di;
        sbi += db * di;
    }
    const double nn = static_cast<double>(n);
    const double var_b = dt, var_i = dt * dt * dt / 3.0, cov = dt * dt / 2.0;
    CHECK(std::fabs(sb / nn) < 3.0 * std::sqrt(var_b / nn));
    CHECK(std::fabs(si / nn) < 3.0 * std::sqrt(var_i / nn));
    CHECK(std::fabs(sbb / nn - var_b) < 3.0 * var_b * std::sqrt(2.0 / nn));
    CHECK(std::fabs(sii / nn - var_i) < 3.0 * var_i * std::sqrt(2.0 / nn));
    CHECK(std::fabs(sbi / nn - cov) < 3.0 * std::sqrt((var_b * var_i + cov * cov) / nn));
}

TEST_CASE("free particle follows the exact linear trajectory") {
    SimConfig cfg;
    cfg.N = 1;
    cfg.T = 1.0;
    cfg.dt = 1.0 / 128.0;
    cfg.sigma = 0.0;
    cfg.kernel = InteractionKernel::zero();
    cfg.initial.kind = InitialSampler::Kind::file;
    cfg.initial.file_points = {{0.3, -0.7}};
    const auto path = simulate(cfg);
    REQUIRE(path.states.size() == 129);
    for (std::size_t k = 0; k < path.states.size(); ++k) {
        CHECK(path.states[k][0].v == -0.7);
        CHECK(path.states[k][0].x == doctest::Approx(0.3 - 0.7 * path.times[k]).epsilon(1e-13));
    }
    for (double z : path.db) CHECK(z == 0.0);
    for (double z : path.di) CHECK(z == 0.0);
}

TEST_CASE("simulation replays bitwise under a fixed config") {
    SimConfig cfg;
    cfg.N = 16;
    cfg.T = 0.25;
    cfg.dt = 1.0 / 64.0;
    cfg.seed = 5;
    cfg.snapshot_count = 5;
    const auto a = simulate(cfg);
    const auto b = simulate(cfg);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k)
        for (std::size_t i = 0; i < a.states[k].size(); ++i) {
            CHECK(a.states[k][i].x == b.states[k][i].x);
            CHECK(a.states[k][i].v == b.states[k][i].v);
        }
    for (std::size_t j = 0; j < a.db.size(); ++j) {
        CHECK(a.db[j] == b.db[j]);
        CHECK(a.di[j] == b.di[j]);
    }

    cfg.seed = 6;
    const auto c = simulate(cfg);
    CHECK(c.states.back()[0].x != a.states.back()[0].x);
}

TEST_CASE("particle relabeling permutes the trajectories exactly") {
    const std::size_t n = 8, m = 16;
    const double dt = 1.0 / 64.0;
    Rng rng(77);
    SimConfig cfg;
    cfg.N = n;
    cfg.T = m * dt;
    cfg.dt = dt;
    cfg.snapshot_count = 3;
    cfg.initial.kind = InitialSampler::Kind::file;
    cfg.initial.file_points = random_state(n, rng);
    std::vector<double> db(m * n), di(m * n);
    for (std::size_t j = 0; j < db.size(); ++j) draw_increment(rng, dt, db[j], di[j]);
    const auto fwd = simulate(cfg, db, di);

    auto rcfg = cfg;
    std::vector<KineticPoint> rpts(cfg.initial.file_points.rbegin(), cfg.initial.file_points.rend());
    rcfg.initial.file_points = rpts;
    std::vector<double> rdb(m * n), rdi(m * n);
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t i = 0; i < n; ++i) {
            rdb[s * n + i] = db[s * n + (n - 1 - i)];
            rdi[s * n + i] = di[s * n + (n - 1 - i)];
        }
    const auto rev = simulate(rcfg, rdb, rdi);
    for (std::size_t k = 0; k < fwd.states.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(rev.states[k][i].x == fwd.states[k][n - 1 - i].x);
            CHECK(rev.states[k][i].v == fwd.states[k][n - 1 - i].v);
        }
}

TEST_CASE("increment aggregation composes and couples the exact free flow") {
    const std::size_t n = 3, m_fine = 16;
    const double dt_fine = 1.0 / 128.0;
    Rng rng(501);
    std::vector<double> db(m_fine * n), di(m_fine * n);
    for (std::size_t j = 0; j < db.size(); ++j) draw_increment(rng, dt_fine, db[j], di[j]);

    std::vector<double> db4, di4, db2, di2, db22, di22;
    aggregate_increments(db, di, n, 4, dt_fine, db4, di4);
    aggregate_increments(db, di, n, 2, dt_fine, db2, di2);
    aggregate_increments(db2, di2, n, 2, 2.0 * dt_fine, db22, di22);
    REQUIRE(db4.size() == db22.size());
    for (std::size_t j = 0; j < db4.size(); ++j) {
        CHECK(db4[j] == doctest::Approx(db22[j]).epsilon(1e-13));
        CHECK(di4[j] == doctest::Approx(di22[j]).epsilon(1e-13));
    }

    // with no interaction the Euler recursion telescopes to the exact flow,
    // so the coarse run driven by aggregated increments lands on the fine one
    SimConfig fine;
    fine.N = n;
    fine.T = m_fine * dt_fine;
    fine.dt = dt_fine;
    fine.kernel = InteractionKernel::zero();
    fine.snapshot_count = 2;
    fine.seed = 42;
    const auto pf = simulate(fine, db, di);
    auto coarse = fine;
    coarse.dt = 4.0 * dt_fine;
    const auto pc = simulate(coarse, db4, di4);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(pc.states.back()[i].x == doctest::Approx(pf.states.back()[i].x).epsilon(1e-12));
        CHECK(pc.states.back()[i].v == doctest::Approx(pf.states.back()[i].v).epsilon(1e-12));
    }

    std::vector<double> t1, t2;
    CHECK_THROWS_AS(aggregate_increments(db, di, n, 0, dt_fine, t1, t2), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_increments(db, di, n, 5, dt_fine, t1, t2), std::invalid_argument);
}

TEST_CASE("deterministic interacting run converges at first order in dt") {
    SimConfig base;
    base.N = 8;
    base.T = 0.5;
    base.sigma = 0.0;
    base.kernel = InteractionKernel::kuramoto(1.0);
    base.initial.kind = InitialSampler::Kind::lattice;
    base.initial.lattice_random_shift = false;
    base.snapshot_count = 2;

    auto final_error = [&](double dt, const std::vector<KineticPoint>& ref) {
        auto cfg = base;
        cfg.dt = dt;
        const auto p = simulate(cfg);
        double e = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i)
            e = std::max(e, std::fabs(p.states.back()[i].x - ref[i].x) +
                                std::fabs(p.states.back()[i].v - ref[i].v));
        return e;
    };

    auto rcfg = base;
    rcfg.dt = 1.0 / 1024.0;
    const auto ref = simulate(rcfg).states.back();
    std::vector<double> errs;
    for (double dt : {1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0})
        errs.push_back(final_error(dt, ref));
    for (std::size_t k = 1; k < errs.size(); ++k) {
        const double ratio = errs[k - 1] / errs[k];
        CHECK(ratio > 1.5);
        CHECK(ratio < 2.6);
    }
}

TEST_CASE("initial samplers: lattice determinism, iid seeding, file checks") {
    InitialSampler lat;
    lat.kind = InitialSampler::Kind::lattice;
    lat.lattice_random_shift = false;
    Rng r1(1), r2(999);
    const auto a = lat.sample(64, r1);
    const auto b = lat.sample(64, r2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].v == b[i].v);
    }

    InitialSampler iid;
    Rng r3(12), r4(12), r5(13);
    const auto c = iid.sample(32, r3);
    const auto d = iid.sample(32, r4);
    const auto e = iid.sample(32, r5);
    CHECK(c[0].x == d[0].x);
    CHECK(c[0].x != e[0].x);

    // the default law has mean v = 0, sd 0.8; check the sample mean band
    Rng r6(14);
    const auto big = iid.sample(20000, r6);
    double mv = 0.0;
    for (const auto& p : big) mv += p.v;
    mv /= static_cast<double>(big.size());
    CHECK(std::fabs(mv) < 3.0 * 0.8 / std::sqrt(20000.0));

    InitialSampler file;
    file.kind = InitialSampler::Kind::file;
    file.file_points = {{0.0, 0.0}};
    Rng r7(1);
    CHECK_THROWS_AS(file.sample(2, r7), std::invalid_argument);
    file.file_points = {{0.0, std::numeric_limits<double>::infinity()}};
    CHECK_THROWS_AS(file.sample(1, r7), std::invalid_argument);
    CHECK_THROWS_AS(iid.sample(0, r7), std::invalid_argument);
}

TEST_CASE("config validation rejects inconsistent settings") {
    SimConfig cfg;
    cfg.N = 4;
    cfg.T = 0.5;
    cfg.dt = 1.0 / 32.0;
    cfg.snapshot_count = 17;
    CHECK_NOTHROW(cfg.validate());
    auto bad = cfg;
    bad.sigma = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.dt = 0.3;  // T / dt is not an integer
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.N = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.snapshot_count = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.snapshot_count = 18;  // more snapshots than steps + 1
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("empirical characteristic function matches the direct sum") {
    SimConfig cfg;
    cfg.N = 7;
    cfg.T = 0.25;
    cfg.dt = 1.0 / 32.0;
    cfg.seed = 20;
    cfg.snapshot_count = 3;
    const auto path = simulate(cfg);
    const auto grid = FrequencyGrid::make(8.0, 8.0, 33, 33);
    const auto hat = empirical_char(path, path.snapshot_indices.back(), grid);

    const auto& state = path.states.back();
    Rng rng(8);
    for (int probe = 0; probe < 5; ++probe) {
        const std::size_t a = static_cast<std::size_t>(rng.uniform(0.0, 33.0));
        const std::size_t b = static_cast<std::size_t>(rng.uniform(0.0, 33.0));
        std::complex<double> direct(0.0, 0.0);
        for (const auto& p : state)
            direct += std::polar(1.0 / 7.0, grid->xi_nodes[a] * p.x + grid->eta_nodes[b] * p.v);
        CHECK(std::abs(hat.at(a, b) - direct) < 1e-13);
    }
    CHECK(std::abs(hat.at(grid->zero_xi_index(), grid->zero_eta_index()) - 1.0) < 1e-13);
    for (std::size_t a = 0; a < 33; ++a)
        for (std::size_t b = 0; b < 33; ++b) CHECK(std::abs(hat.at(a, b)) <= 1.0 + 1e-12);
    CHECK_THROWS_AS(empirical_char(path, 99, grid), std::invalid_argument);
}

TEST_CASE("path csv and increment binary round trips") {
    SimConfig cfg;
    cfg.N = 5;
    cfg.T = 0.25;
    cfg.dt = 1.0 / 32.0;
    cfg.seed = 9;
    cfg.snapshot_count = 9;
    const auto path = simulate(cfg);

    const auto csv = tmp_file("kinlab_test_path.csv");
    write_path_csv(path, csv);
    const auto snaps = read_path_csv(csv);
    const auto times = path.snapshot_times();
    REQUIRE(snaps.times.size() == times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK(snaps.times[k] == times[k]);
        for (std::size_t i = 0; i < cfg.N; ++i) {
            CHECK(snaps.states[k][i].x == path.states[path.snapshot_indices[k]][i].x);
            CHECK(snaps.states[k][i].v == path.states[path.snapshot_indices[k]][i].v);
        }
    }

    const auto bin = tmp_file("kinlab_test_incr.bin");
    write_increments(path, bin);
    const auto inc = read_increments(bin);
    CHECK(inc.n == 5);
    CHECK(inc.m == 8);
    CHECK(inc.d == 1);
    REQUIRE(inc.db.size() == path.db.size());
    for (std::size_t j = 0; j < inc.db.size(); ++j) {
        CHECK(inc.db[j] == path.db[j]);
        CHECK(inc.di[j] == path.di[j]);
    }

    // malformed inputs: wrong header, inconsistent counts, corrupt binary
    const auto badcsv = tmp_file("kinlab_test_bad.csv");
    {
        std::ofstream out(badcsv);
        out << "time,id,x,v\n0,0,1,2\n";
    }
    CHECK_THROWS_AS(read_path_csv(badcsv), std::runtime_error);
    {
        std::ofstream out(badcsv);
        out << "t,particle_id,x,v\n0,0,1,2\n0,1,1,2\n0.5,0,1,2\n";
    }
    CHECK_THROWS_AS(read_path_csv(badcsv), std::runtime_error);

    const auto badbin = tmp_file("kinlab_test_bad.bin");
    {
        std::ifstream in(bin, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(badbin, std::ios::binary);
        out.write(all.data(), static_cast<std::streamsize>(all.size() - 4));
    }
    CHECK_THROWS_AS(read_increments(badbin), std::runtime_error);

    std::remove(csv.c_str());
    std::remove(bin.c_str());
    std::remove(badcsv.c_str());
}

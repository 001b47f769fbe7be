#include "kinlab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "kinlab/io_util.hpp"
#include "kinlab/norms.hpp"

namespace kinlab {

ProductMixtureDensity default_initial_density() {
    ProductMixtureDensity d;
    d.rho_x.weights = {0.5, 0.5};
    d.rho_x.means = {-1.2, 1.2};
    d.rho_x.sigmas = {0.6, 0.6};
    d.rho_v.weights = {1.0};
    d.rho_v.means = {0.0};
    d.rho_v.sigmas = {0.8};
    return d;
}

std::vector<KineticPoint> InitialSampler::sample(std::size_t n, Rng& rng) const {
    if (n == 0) throw std::invalid_argument("InitialSampler: need at least one particle");
    std::vector<KineticPoint> out(n);
    switch (kind) {
        case Kind::iid:
            for (auto& p : out) {
                p.x = density.rho_x.sample(rng);
                p.v = density.rho_v.sample(rng);
            }
            break;
        case Kind::lattice: {
            const double su = lattice_random_shift ? rng.uniform() : 0.0;
            const double sw = lattice_random_shift ? rng.uniform() : 0.0;
            // golden-ratio rank-one lattice in the quantile square
            const double phi = 0.61803398874989485;
            const double nn = static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                double u = std::fmod((static_cast<double>(i) + 0.5) / nn + su, 1.0);
                double w = std::fmod(static_cast<double>(i) * phi + 0.5 / nn + sw, 1.0);
                u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
                w = std::min(std::max(w, 1e-12), 1.0 - 1e-12);
                out[i].x = density.rho_x.inv_cdf(u);
                out[i].v = density.rho_v.inv_cdf(w);
            }
            break;
        }
        case Kind::file:
            if (file_points.size() != n)
                throw std::invalid_argument("InitialSampler: file point count mismatch");
            out = file_points;
            break;
    }
    for (const auto& p : out)
        if (!finite(p)) throw std::invalid_argument("InitialSampler: non-finite point");
    return out;
}

std::size_t SimConfig::n_steps() const {
    return static_cast<std::size_t>(std::llround(T / dt));
}

void SimConfig::validate() const {
    if (N == 0) throw std::invalid_argument("SimConfig: N must be positive");
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("SimConfig: T and dt must be positive");
    const auto m = n_steps();
    if (m == 0 || std::fabs(static_cast<double>(m) * dt - T) > 1e-9 * std::max(1.0, T))
        throw std::invalid_argument("SimConfig: T must be an integer multiple of dt");
    const bool sigma_ok = sigma == 0.0 || std::fabs(sigma - std::sqrt(2.0)) < 1e-12;
    if (!sigma_ok) throw std::invalid_argument("SimConfig: sigma must be 0 or sqrt(2)");
    if (snapshot_count < 2 || snapshot_count > m + 1)
        throw std::invalid_argument("SimConfig: snapshot_count must lie in [2, n_steps+1]");
}

std::vector<double> EnsemblePath::snapshot_times() const {
    std::vector<double> out;
    out.reserve(snapshot_indices.size());
    for (auto i : snapshot_indices) out.push_back(times[i]);
    return out;
}

std::vector<double> drift_pairwise_reference(const std::vector<KineticPoint>& state,
                                             const InteractionKernel& kernel) {
    const std::size_t n = state.size();
    if (n == 0) throw std::invalid_argument("drift_pairwise: empty state");
    for (const auto& p : state)
        if (!finite(p)) throw std::invalid_argument("drift_pairwise: non-finite state");
    std::vector<double> out(n, 0.0);
    if (kernel.structure == InteractionKernel::Structure::zero) return out;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            s += kernel(state[i].x - state[j].x, state[i].v - state[j].v);
        }
        out[i] = s * inv_n;
    }
    return out;
}

std::vector<double> drift_pairwise(const std::vector<KineticPoint>& state,
                                   const InteractionKernel& kernel) {
    if (kernel.structure != InteractionKernel::Structure::sine_mode)
        return drift_pairwise_reference(state, kernel);
    const std::size_t n = state.size();
    if (n == 0) throw std::invalid_argument("drift_pairwise: empty state");
    double c = 0.0, s = 0.0;
    for (const auto& p : state) {
        if (!finite(p)) throw std::invalid_argument("drift_pairwise: non-finite state");
        c += std::cos(p.x);
        s += std::sin(p.x);
    }
    // sum_j sin(x_i - x_j) = sin(x_i) C - cos(x_i) S, and the j = i term is 0
    std::vector<double> out(n);
    const double a = -kernel.sine_amplitude / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a * (std::sin(state[i].x) * c - std::cos(state[i].x) * s);
    return out;
}

std::vector<KineticPoint> step(const std::vector<KineticPoint>& state, double dt,
                               const double* db_row, const double* di_row,
                               const InteractionKernel& kernel, double sigma) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    const std::vector<double> drift = drift_pairwise(state, kernel);
    std::vector<KineticPoint> out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        const double noise_v = sigma > 0.0 ? sigma * db_row[i] : 0.0;
        const double noise_x = sigma > 0.0 ? sigma * di_row[i] : 0.0;
        out[i].x = state[i].x + state[i].v * dt + noise_x;
        out[i].v = state[i].v + drift[i] * dt + noise_v;
    }
    return out;
}

void draw_increment(Rng& rng, double dt, double& dB, double& dI) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    dB = std::sqrt(dt) * z1;
    // Var(dI) = dt^3 (1/4 + 1/12) = dt^3/3, Cov(dI, dB) = dt^2/2
    dI = std::pow(dt, 1.5) * (0.5 * z1 + z2 / (2.0 * std::sqrt(3.0)));
}

std::vector<std::size_t> snapshot_index_set(std::size_t m, std::size_t count) {
    if (count < 2 || count > m + 1)
        throw std::invalid_argument("snapshot_index_set: count must be in [2, n_steps + 1]");
    std::vector<std::size_t> out(count);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = static_cast<std::size_t>(
            std::llround(static_cast<double>(k) * static_cast<double>(m) /
                         static_cast<double>(count - 1)));
    return out;
}

namespace {

EnsemblePath run_simulation(const SimConfig& cfg, const std::vector<double>* db_in,
                            const std::vector<double>* di_in) {
    cfg.validate();
    const std::size_t m = cfg.n_steps();
    const std::size_t n = cfg.N;

    EnsemblePath path;
    path.config = cfg;
    path.times.resize(m + 1);
    for (std::size_t k = 0; k <= m; ++k) path.times[k] = static_cast<double>(k) * cfg.dt;
    path.snapshot_indices = snapshot_index_set(m, cfg.snapshot_count);

    Rng rng_init(derive_seed(cfg.seed, 1, 0, 0));
    path.states.reserve(m + 1);
    path.states.push_back(cfg.initial.sample(n, rng_init));

    if (db_in != nullptr || di_in != nullptr) {
        if (db_in == nullptr || di_in == nullptr || db_in->size() != m * n ||
            di_in->size() != m * n)
            throw std::invalid_argument("simulate: supplied increments have wrong length");
        path.db = *db_in;
        path.di = *di_in;
    } else {
        path.db.resize(m * n);
        path.di.resize(m * n);
        // sigma == 0 is the deterministic mode: the stored series stays zero so
        // that replays and Ito sums built from it are exactly noise-free
        if (cfg.sigma > 0.0) {
            Rng rng_noise(derive_seed(cfg.seed, 2, 0, 0));
            for (std::size_t s = 0; s < m; ++s)
                for (std::size_t i = 0; i < n; ++i)
                    draw_increment(rng_noise, cfg.dt, path.db[s * n + i], path.di[s * n + i]);
        }
    }

    for (std::size_t s = 0; s < m; ++s) {
        auto next = step(path.states.back(), cfg.dt, &path.db[s * n], &path.di[s * n],
                         cfg.kernel, cfg.sigma);
        for (const auto& p : next)
            if (!finite(p))
                throw std::runtime_error("simulate: non-finite state at step " +
                                         std::to_string(s + 1));
        path.states.push_back(std::move(next));
    }
    return path;
}

}  // namespace

EnsemblePath simulate(const SimConfig& config) { return run_simulation(config, nullptr, nullptr); }

EnsemblePath simulate(const SimConfig& config, const std::vector<double>& db,
                      const std::vector<double>& di) {
    return run_simulation(config, &db, &di);
}

void aggregate_increments(const std::vector<double>& db_fine, const std::vector<double>& di_fine,
                          std::size_t n_particles, std::size_t factor, double dt_fine,
                          std::vector<double>& db_coarse, std::vector<double>& di_coarse) {
    if (factor == 0 || n_particles == 0)
        throw std::invalid_argument("aggregate_increments: bad factor or particle count");
    if (db_fine.size() != di_fine.size() || db_fine.size() % (n_particles * factor) != 0)
        throw std::invalid_argument("aggregate_increments: length not divisible");
    const std::size_t m_fine = db_fine.size() / n_particles;
    const std::size_t m_coarse = m_fine / factor;
    db_coarse.assign(m_coarse * n_particles, 0.0);
    di_coarse.assign(m_coarse * n_particles, 0.0);
    for (std::size_t mc = 0; mc < m_coarse; ++mc)
        for (std::size_t i = 0; i < n_particles; ++i) {
            double bsum = 0.0, bacc = 0.0, iacc = 0.0;
            for (std::size_t k = 0; k < factor; ++k) {
                const std::size_t idx = (mc * factor + k) * n_particles + i;
                // block integral of (B - B_block_start) adds the offset
                // accumulated by earlier sub-blocks
                iacc += di_fine[idx] + dt_fine * bsum;
                bsum += db_fine[idx];
                bacc += db_fine[idx];
            }
            db_coarse[mc * n_particles + i] = bacc;
            di_coarse[mc * n_particles + i] = iacc;
        }
}

SpectralField empirical_char(const EnsemblePath& path, std::size_t t_index, const GridPtr& grid) {
    if (t_index >= path.states.size())
        throw std::invalid_argument("empirical_char: time index out of range");
    return measure_char(path.states[t_index], grid);
}

void write_path_csv(const EnsemblePath& path, const std::string& file) {
    std::ostringstream out;
    out << "t,particle_id,x,v\n";
    for (auto idx : path.snapshot_indices)
        for (std::size_t i = 0; i < path.states[idx].size(); ++i)
            out << format_double(path.times[idx]) << ',' << i << ','
                << format_double(path.states[idx][i].x) << ','
                << format_double(path.states[idx][i].v) << '\n';
    atomic_write_file(file, out.str());
}

PathSnapshots read_path_csv(const std::string& file) {
    std::istringstream in(read_file(file));
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,particle_id,x,v", 0) != 0)
        throw std::runtime_error("path csv: missing header");
    PathSnapshots out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t = 0.0, x = 0.0, v = 0.0;
        unsigned long id = 0;
        if (std::sscanf(line.c_str(), "%lg,%lu,%lg,%lg", &t, &id, &x, &v) != 4)
            throw std::runtime_error("path csv: malformed row: " + line);
        if (out.times.empty() || t != out.times.back()) {
            out.times.push_back(t);
            out.states.emplace_back();
        }
        if (id != out.states.back().size())
            throw std::runtime_error("path csv: particle ids out of order");
        out.states.back().push_back(KineticPoint{x, v});
    }
    if (out.times.empty()) throw std::runtime_error("path csv: no rows");
    for (const auto& s : out.states)
        if (s.size() != out.states.front().size())
            throw std::runtime_error("path csv: inconsistent particle counts");
    return out;
}

namespace {
constexpr std::uint32_t kIncrementMagic = 0x4B494E43;  // "KINC"
constexpr std::uint16_t kIncrementVersion = 1;

template <class T>
void append_raw(std::string& s, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    s.append(buf, sizeof(T));
}

template <class T>
T read_raw(const std::string& s, std::size_t& pos) {
    if (pos + sizeof(T) > s.size()) throw std::runtime_error("increment file truncated");
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}
}  // namespace

void write_increments(const EnsemblePath& path, const std::string& file) {
    const auto n = static_cast<std::uint32_t>(path.n_particles());
    const auto m = static_cast<std::uint32_t>(path.n_steps());
    std::string s;
    s.reserve(16 + 16 * path.db.size());
    append_raw(s, kIncrementMagic);
    append_raw(s, kIncrementVersion);
    append_raw(s, static_cast<std::uint16_t>(1));  // d
    append_raw(s, n);
    append_raw(s, m);
    for (double v : path.db) append_raw(s, v);
    for (double v : path.di) append_raw(s, v);
    atomic_write_file(file, s);
}

IncrementFile read_increments(const std::string& file) {
    const std::string s = read_file(file);
    std::size_t pos = 0;
    if (read_raw<std::uint32_t>(s, pos) != kIncrementMagic)
        throw std::runtime_error("increment file: bad magic");
    if (read_raw<std::uint16_t>(s, pos) != kIncrementVersion)
        throw std::runtime_error("increment file: unsupported version");
    IncrementFile f;
    f.d = read_raw<std::uint16_t>(s, pos);
    if (f.d != 1) throw std::runtime_error("increment file: only d = 1 supported");
    f.n = read_raw<std::uint32_t>(s, pos);
    f.m = read_raw<std::uint32_t>(s, pos);
    const std::size_t count = static_cast<std::size_t>(f.n) * f.m;
    f.db.resize(count);
    f.di.resize(count);
    for (auto& v : f.db) v = read_raw<double>(s, pos);
    for (auto& v : f.di) v = read_raw<double>(s, pos);
    if (pos != s.size()) throw std::runtime_error("increment file: trailing bytes");
    return f;
}

}  // namespace kinlab

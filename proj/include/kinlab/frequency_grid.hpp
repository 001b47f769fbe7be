// Uniform tensor frequency grids and complex fields living on them.
//
// One grid serves both uses of frequency space: transforms of grid functions
// and characteristic functions of measures. Quadrature is the tensor trapezoid
// rule on the truncated box [-Xi_max, Xi_max] x [-H_max, H_max]; the per-axis
// weights sum exactly to the box side lengths.

#ifndef KINLAB_FREQUENCY_GRID_HPP
#define KINLAB_FREQUENCY_GRID_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <vector>

namespace kinlab {

struct FrequencyGrid {
    std::vector<double> xi_nodes;
    std::vector<double> eta_nodes;
    std::vector<double> xi_weights;   // trapezoid weights per xi node
    std::vector<double> eta_weights;  // trapezoid weights per eta node
    double xi_max = 0.0;
    double eta_max = 0.0;

    static std::shared_ptr<const FrequencyGrid> make(double xi_max, double eta_max,
                                                     std::size_t n_xi, std::size_t n_eta) {
        if (n_xi < 2 || n_eta < 2) throw std::invalid_argument("FrequencyGrid: need at least 2 nodes per axis");
        if (xi_max <= 0.0 || eta_max <= 0.0) throw std::invalid_argument("FrequencyGrid: cutoffs must be positive");
        auto g = std::make_shared<FrequencyGrid>();
        g->xi_max = xi_max;
        g->eta_max = eta_max;
        fill_axis(g->xi_nodes, g->xi_weights, xi_max, n_xi);
        fill_axis(g->eta_nodes, g->eta_weights, eta_max, n_eta);
        return g;
    }

    std::size_t n_xi() const { return xi_nodes.size(); }
    std::size_t n_eta() const { return eta_nodes.size(); }
    double h_xi() const { return 2.0 * xi_max / static_cast<double>(n_xi() - 1); }
    double h_eta() const { return 2.0 * eta_max / static_cast<double>(n_eta() - 1); }

    // index of the zero node, or throws if the axis does not contain 0 exactly
    std::size_t zero_xi_index() const { return zero_index(xi_nodes); }
    std::size_t zero_eta_index() const { return zero_index(eta_nodes); }

private:
    static void fill_axis(std::vector<double>& nodes, std::vector<double>& weights,
                          double half_width, std::size_t n) {
        nodes.resize(n);
        weights.resize(n);
        const double h = 2.0 * half_width / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            // symmetric construction keeps nodes(i) == -nodes(n-1-i) exactly
            const double k = 0.5 * (static_cast<double>(i) - static_cast<double>(n - 1 - i));
            nodes[i] = k * h;
            weights[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
        }
    }

    static std::size_t zero_index(const std::vector<double>& nodes) {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == 0.0) return i;
        throw std::logic_error("FrequencyGrid: axis has no exact zero node (use an odd node count)");
    }
};

using GridPtr = std::shared_ptr<const FrequencyGrid>;

// Complex values on a FrequencyGrid; rows index xi, columns index eta.
struct SpectralField {
    GridPtr grid;
    Eigen::MatrixXcd values;

    SpectralField() = default;
    explicit SpectralField(GridPtr g)
        : grid(std::move(g)),
          values(Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(grid->n_xi()),
                                        static_cast<Eigen::Index>(grid->n_eta()))) {}

    std::complex<double>& at(std::size_t a, std::size_t b) {
        return values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    std::complex<double> at(std::size_t a, std::size_t b) const {
        return values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }

    // largest |values(-xi,-eta) - conj(values(xi,eta))|; zero for transforms of
    // real functions and real measures
    double conjugate_symmetry_defect() const {
        const Eigen::Index nx = values.rows(), ne = values.cols();
        double worst = 0.0;
        for (Eigen::Index a = 0; a < nx; ++a)
            for (Eigen::Index b = 0; b < ne; ++b)
                worst = std::max(worst,
                                 std::abs(values(nx - 1 - a, ne - 1 - b) - std::conj(values(a, b))));
        return worst;
    }
};

inline void check_same_grid(const SpectralField& f, const SpectralField& g) {
    if (f.grid.get() != g.grid.get())
        throw std::invalid_argument("SpectralField: operands live on different grids");
}

}  // namespace kinlab

#endif

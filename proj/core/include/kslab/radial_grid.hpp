#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kslab {

// Behaviour of a radial function under r -> -r; decides how stencils
// reaching across the origin are closed.
enum class Parity { Even, Odd };

inline Parity flip(Parity p) { return p == Parity::Even ? Parity::Odd : Parity::Even; }

struct GridSpec {
    double h0 = 0.02;         // spacing on [0, r_uniform]
    double r_uniform = 10.0;
    double stretch = 0.02;    // beyond r_uniform the spacing grows as h0 + stretch*(r - r_uniform)
    double r_max = 100.0;
    int order = 6;            // finite-difference order, even, >= 2
};

// Nonuniform radial mesh r_0 = 0 < r_1 < ... < r_N with finite-difference
// stencils (ghost nodes mirrored through the origin) and cell-wise
// Gauss-Legendre quadrature over local interpolants.
class RadialGrid {
public:
    explicit RadialGrid(const GridSpec& spec);
    RadialGrid(std::vector<double> nodes, int order);

    static std::shared_ptr<const RadialGrid> make(const GridSpec& spec);

    std::size_t size() const { return r_.size(); }
    double r(std::size_t i) const { return r_[i]; }
    const std::vector<double>& nodes() const { return r_; }
    double r_max() const { return r_.back(); }
    int order() const { return order_; }

    // Weights w_i with sum_i w_i f(r_i) = int_0^{r_max} f(r) r dr for even f.
    const std::vector<double>& quad_weights() const { return quad_w_; }

    // Minimum number of nodes per decade over [r_lo, r_hi].
    double nodes_per_decade(double r_lo, double r_hi) const;

    // k-th derivative (k = 1, 2, 3) of sampled values with the given parity.
    std::vector<double> derivative(std::span<const double> f, Parity p, int k) const;
    // Row i of the same operator as (node, weight) pairs, mirrored ghosts folded in.
    std::vector<std::pair<std::size_t, double>> derivative_row(std::size_t i, Parity p, int k) const;

    // c_i = int_0^{r_i} f(t) w(t) dt with f interpolated cell-wise and w exact.
    std::vector<double> cumulative(std::span<const double> f, Parity p,
                                   const std::function<double(double)>& w) const;
    // Cumulative integral of f(t) t dt (the partial-mass kernel).
    std::vector<double> cumulative_r(std::span<const double> f, Parity p) const;
    // Cumulative integral of f(t) dt.
    std::vector<double> cumulative_1(std::span<const double> f, Parity p) const;

    double interpolate(std::span<const double> f, Parity p, double x) const;
    std::vector<double> interpolate(std::span<const double> f, Parity p,
                                    std::span<const double> xs) const;

    // Index c with r_c <= x < r_{c+1} (clamped to the last cell).
    std::size_t locate(double x) const;

    std::vector<double> sample(const std::function<double(double)>& f) const;

private:
    struct Stencil {
        std::vector<int> idx;       // node index
        std::vector<char> ghost;    // mirrored through the origin
        std::vector<double> w;      // weights per stencil position
        std::vector<double> x;      // signed positions
    };

    void build();
    double gather(std::span<const double> f, Parity p, const Stencil& s, std::size_t k) const {
        const double v = f[static_cast<std::size_t>(s.idx[k])];
        return (s.ghost[k] && p == Parity::Odd) ? -v : v;
    }
    Stencil stencil_positions(long start, int count) const;
    std::vector<double> cumulative_weighted(std::span<const double> f, Parity p, const double* wq) const;

    std::vector<double> r_;
    int order_ = 6;
    std::vector<double> quad_w_;
    std::vector<Stencil> fd_[3];              // per derivative order, per node
    std::vector<Stencil> cell_;               // interpolation stencil per cell
    std::vector<double> gl_t_;                // Gauss points, cell-major
    std::vector<double> gl_w_;                // Gauss weights, cell-major
    std::vector<double> gl_basis_;            // [cell][gauss][stencil]
    std::vector<std::size_t> gl_off_;         // first Gauss point of each cell
    std::vector<double> gl_one_;
    int n_gauss_ = 8;
    int n_cell_stencil_ = 8;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

// Sampled radial function on a grid.
struct RadialField {
    GridPtr grid;
    std::vector<double> values;
    Parity parity = Parity::Even;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double r(std::size_t i) const { return grid->r(i); }
    double at(double x) const { return grid->interpolate(values, parity, x); }
};

RadialField make_field(GridPtr grid, const std::function<double(double)>& f, Parity p);

// Finite-difference derivative; parity flips for odd order.
RadialField derivative(const RadialField& f, int order);

// f'' + f'/r with the limit 2 f''(0) at the origin. Requires an even field.
RadialField radial_laplacian(const RadialField& f);

struct IntegralResult {
    double value = 0.0;
    double tail_estimate = 0.0;  // |I(r_max) - I(r_max/2)|
};

// 2 pi int_0^{r_max} f r dr.
IntegralResult integrate(const RadialField& f);

// m(r) = int_0^r f t dt.
RadialField partial_mass(const RadialField& f);

// d_r phi_f = m_f / r.
RadialField poisson_field(const RadialField& f);

enum class Normalization {
    ValueAtZero,    // phi(0) = 0
    LogConvolution, // phi(0) = int_0^inf f log(t) t dt with f the source of g
    Decay           // phi -> 0 at infinity (power-law tail of g extrapolated)
};

RadialField potential_from_gradient(const RadialField& g, Normalization n);

// "r,value" CSV with 17 significant digits.
void write_csv(const RadialField& f, const std::string& path);

}  // namespace kslab

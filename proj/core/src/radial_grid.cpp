#include "kslab/radial_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace kslab {

namespace {

// Fornberg's recursion: c[j*(m+1)+k] is the weight of x[j] in the k-th
// derivative at z.
std::vector<double> fornberg(double z, const std::vector<double>& x, int m) {
    const std::size_t n = x.size();
    const std::size_t mm = static_cast<std::size_t>(m) + 1;
    std::vector<double> c(n * mm, 0.0);
    double c1 = 1.0;
    double c4 = x[0] - z;
    c[0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min<std::size_t>(i, static_cast<std::size_t>(m));
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k)
                    c[i * mm + k] = c1 * (static_cast<double>(k) * c[(i - 1) * mm + k - 1] -
                                          c5 * c[(i - 1) * mm + k]) / c2;
                c[i * mm] = -c1 * c5 * c[(i - 1) * mm] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k)
                c[j * mm + k] = (c4 * c[j * mm + k] - static_cast<double>(k) * c[j * mm + k - 1]) / c3;
            c[j * mm] = c4 * c[j * mm] / c3;
        }
        c1 = c2;
    }
    return c;
}

std::vector<double> lagrange(double z, const std::vector<double>& x) { return fornberg(z, x, 0); }

struct GaussRule {
    std::vector<double> t;  // on [0,1]
    std::vector<double> w;
};

const GaussRule& gauss8() {
    static const GaussRule rule = [] {
        using G = boost::math::quadrature::gauss<double, 8>;
        GaussRule g;
        const auto& a = G::abscissa();
        const auto& w = G::weights();
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (int s : {-1, 1}) {
                if (a[i] == 0.0 && s < 0) continue;
                g.t.push_back(0.5 * (1.0 + s * a[i]));
                g.w.push_back(0.5 * w[i]);
            }
        }
        return g;
    }();
    return rule;
}

std::vector<double> make_nodes(const GridSpec& s) {
    if (!(s.h0 > 0.0) || !(s.r_max > s.h0) || s.stretch < 0.0)
        throw std::invalid_argument("GridSpec: need h0 > 0, r_max > h0, stretch >= 0");
    std::vector<double> r{0.0};
    if (s.r_max <= s.r_uniform || s.stretch == 0.0) {
        const auto n = static_cast<std::size_t>(std::ceil(s.r_max / s.h0 - 1e-9));
        for (std::size_t i = 1; i <= n; ++i) r.push_back(s.r_max * static_cast<double>(i) / static_cast<double>(n));
        return r;
    }
    const auto n_uniform = static_cast<std::size_t>(std::llround(s.r_uniform / s.h0));
    const double h = s.r_uniform / static_cast<double>(n_uniform);
    for (std::size_t i = 1; i <= n_uniform; ++i) r.push_back(h * static_cast<double>(i));
    while (r.back() < s.r_max) {
        const double x = r.back();
        r.push_back(x + h + s.stretch * (x - s.r_uniform));
    }
    // Stretch the graded part so that the last node lands on r_max without a
    // sliver cell; the spacing stays smooth, which keeps quadrature weights positive.
    const double last = r.back();
    const double prev = r[r.size() - 2];
    if (last - s.r_max > 0.5 * (last - prev)) r.pop_back();
    const double scale = (s.r_max - s.r_uniform) / (r.back() - s.r_uniform);
    for (std::size_t i = n_uniform + 1; i < r.size(); ++i) r[i] = s.r_uniform + (r[i] - s.r_uniform) * scale;
    r.back() = s.r_max;
    return r;
}

}  // namespace

RadialGrid::RadialGrid(const GridSpec& spec) : r_(make_nodes(spec)), order_(spec.order) { build(); }

RadialGrid::RadialGrid(std::vector<double> nodes, int order) : r_(std::move(nodes)), order_(order) {
    build();
}

std::shared_ptr<const RadialGrid> RadialGrid::make(const GridSpec& spec) {
    return std::make_shared<const RadialGrid>(spec);
}

RadialGrid::Stencil RadialGrid::stencil_positions(long start, int count) const {
    Stencil s;
    for (long j = start; j < start + count; ++j) {
        s.idx.push_back(static_cast<int>(std::labs(j)));
        s.ghost.push_back(j < 0 ? 1 : 0);
    }
    return s;
}

void RadialGrid::build() {
    if (order_ < 2 || order_ % 2 != 0) throw std::invalid_argument("RadialGrid: order must be even and >= 2");
    if (r_.size() < 3 || r_.front() != 0.0) throw std::invalid_argument("RadialGrid: need r_0 = 0 and >= 3 nodes");
    for (std::size_t i = 1; i < r_.size(); ++i)
        if (!(r_[i] > r_[i - 1])) throw std::invalid_argument("RadialGrid: nodes must increase strictly");

    const long n_nodes = static_cast<long>(r_.size());
    auto position = [&](const Stencil& s, std::size_t k) {
        const double x = r_[static_cast<std::size_t>(s.idx[k])];
        return s.ghost[k] ? -x : x;
    };

    for (int k = 1; k <= 3; ++k) {
        const int count = static_cast<int>(std::min<long>(k == 3 ? order_ + 3 : order_ + 1, n_nodes));
        auto& table = fd_[k - 1];
        table.resize(r_.size());
        for (long i = 0; i < n_nodes; ++i) {
            long start = i - (count - 1) / 2;
            if (start + count > n_nodes) start = n_nodes - count;
            Stencil s = stencil_positions(start, count);
            std::vector<double> x(s.idx.size());
            for (std::size_t q = 0; q < x.size(); ++q) x[q] = position(s, q);
            const auto c = fornberg(r_[static_cast<std::size_t>(i)], x, k);
            s.w.resize(x.size());
            for (std::size_t q = 0; q < x.size(); ++q) s.w[q] = c[q * static_cast<std::size_t>(k + 1) + static_cast<std::size_t>(k)];
            table[static_cast<std::size_t>(i)] = std::move(s);
        }
    }

    // Cell interpolants and Gauss points. The first cell is split geometrically
    // so that weights with log or 1/t behaviour at the origin stay accurate.
    n_cell_stencil_ = static_cast<int>(std::min<long>(order_ + 2, n_nodes));
    const auto& g = gauss8();
    const std::size_t n_cells = r_.size() - 1;
    cell_.resize(n_cells);
    gl_off_.assign(n_cells + 1, 0);
    gl_t_.clear();
    gl_w_.clear();
    gl_basis_.clear();
    quad_w_.assign(r_.size(), 0.0);
    for (std::size_t c = 0; c < n_cells; ++c) {
        // Centred stencils; near r_max they shrink (to at least 4 points) instead
        // of going one-sided, which would make some quadrature weights negative.
        int count = n_cell_stencil_;
        const long right = n_nodes - 1 - static_cast<long>(c);
        if (right < count / 2) count = std::min<int>(count, std::max<int>(4, static_cast<int>(2 * right)));
        long start = static_cast<long>(c) - count / 2 + 1;
        if (start + count > n_nodes) start = n_nodes - count;
        Stencil s = stencil_positions(start, count);
        std::vector<double> x(s.idx.size());
        for (std::size_t q = 0; q < x.size(); ++q) x[q] = position(s, q);
        // Pad to the common stride with zero-weight entries.
        while (static_cast<int>(s.idx.size()) < n_cell_stencil_) {
            s.idx.push_back(s.idx.back());
            s.ghost.push_back(s.ghost.back());
        }

        std::vector<std::pair<double, double>> pieces;
        const double a = r_[c];
        const double b = r_[c + 1];
        if (c == 0) {
            double lo = 0.0;
            for (double f : {1.0 / 4096, 1.0 / 256, 1.0 / 16, 1.0}) {
                pieces.emplace_back(lo, f * b);
                lo = f * b;
            }
        } else {
            pieces.emplace_back(a, b);
        }
        for (const auto& [lo, hi] : pieces) {
            for (std::size_t q = 0; q < g.t.size(); ++q) {
                const double t = lo + (hi - lo) * g.t[q];
                const double w = (hi - lo) * g.w[q];
                gl_t_.push_back(t);
                gl_w_.push_back(w);
                const auto l = lagrange(t, x);
                for (std::size_t k = 0; k < l.size(); ++k) {
                    gl_basis_.push_back(l[k]);
                    quad_w_[static_cast<std::size_t>(s.idx[k])] += w * t * l[k];
                }
                for (std::size_t k = l.size(); k < static_cast<std::size_t>(n_cell_stencil_); ++k)
                    gl_basis_.push_back(0.0);
            }
        }
        gl_off_[c + 1] = gl_t_.size();
        s.x = std::move(x);
        cell_[c] = std::move(s);
    }
    gl_one_.assign(gl_t_.size(), 1.0);
}

double RadialGrid::nodes_per_decade(double r_lo, double r_hi) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < r_.size(); ++i) {
        if (r_[i] < r_lo || r_[i] > r_hi) continue;
        best = std::min(best, 1.0 / std::log10(r_[i + 1] / r_[i]));
    }
    return best;
}

std::vector<double> RadialGrid::derivative(std::span<const double> f, Parity p, int k) const {
    if (k < 1 || k > 3) throw std::invalid_argument("derivative: order must be 1, 2 or 3");
    if (f.size() != r_.size()) throw std::invalid_argument("derivative: size mismatch");
    if (static_cast<int>(r_.size()) < order_ + 2) throw std::invalid_argument("derivative: grid too coarse for stencil order");
    std::vector<double> out(r_.size());
    const auto& table = fd_[k - 1];
    for (std::size_t i = 0; i < r_.size(); ++i) {
        const auto& s = table[i];
        double acc = 0.0;
        for (std::size_t q = 0; q < s.w.size(); ++q) acc += s.w[q] * gather(f, p, s, q);
        out[i] = acc;
    }
    const Parity result = (k % 2 == 1) ? flip(p) : p;
    if (result == Parity::Odd) out[0] = 0.0;
    return out;
}

std::vector<std::pair<std::size_t, double>> RadialGrid::derivative_row(std::size_t i, Parity p, int k) const {
    if (k < 1 || k > 3) throw std::invalid_argument("derivative_row: order must be 1, 2 or 3");
    std::vector<std::pair<std::size_t, double>> row;
    const Parity result = (k % 2 == 1) ? flip(p) : p;
    if (i == 0 && result == Parity::Odd) return row;
    const auto& s = fd_[k - 1].at(i);
    for (std::size_t q = 0; q < s.w.size(); ++q) {
        const double w = (s.ghost[q] && p == Parity::Odd) ? -s.w[q] : s.w[q];
        const auto j = static_cast<std::size_t>(s.idx[q]);
        auto it = std::find_if(row.begin(), row.end(), [j](const auto& e) { return e.first == j; });
        if (it == row.end()) row.emplace_back(j, w);
        else it->second += w;
    }
    return row;
}

std::vector<double> RadialGrid::cumulative_weighted(std::span<const double> f, Parity p,
                                                    const double* wq) const {
    if (f.size() != r_.size()) throw std::invalid_argument("cumulative: size mismatch");
    const auto n_st = static_cast<std::size_t>(n_cell_stencil_);
    std::vector<double> out(r_.size(), 0.0);
    std::vector<double> v(n_st);
    double acc = 0.0;
    for (std::size_t c = 0; c + 1 < r_.size(); ++c) {
        for (std::size_t k = 0; k < n_st; ++k) v[k] = gather(f, p, cell_[c], k);
        for (std::size_t q = gl_off_[c]; q < gl_off_[c + 1]; ++q) {
            const double* l = &gl_basis_[q * n_st];
            double fi = 0.0;
            for (std::size_t k = 0; k < n_st; ++k) fi += l[k] * v[k];
            acc += gl_w_[q] * wq[q] * fi;
        }
        out[c + 1] = acc;
    }
    return out;
}

std::vector<double> RadialGrid::cumulative(std::span<const double> f, Parity p,
                                           const std::function<double(double)>& w) const {
    std::vector<double> wq(gl_t_.size());
    for (std::size_t q = 0; q < wq.size(); ++q) wq[q] = w(gl_t_[q]);
    return cumulative_weighted(f, p, wq.data());
}

std::vector<double> RadialGrid::cumulative_r(std::span<const double> f, Parity p) const {
    return cumulative_weighted(f, p, gl_t_.data());
}

std::vector<double> RadialGrid::cumulative_1(std::span<const double> f, Parity p) const {
    return cumulative_weighted(f, p, gl_one_.data());
}

std::size_t RadialGrid::locate(double x) const {
    const auto it = std::upper_bound(r_.begin(), r_.end(), x);
    const long c = static_cast<long>(it - r_.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(r_.size()) - 2));
}

double RadialGrid::interpolate(std::span<const double> f, Parity p, double x) const {
    if (x < 0.0) {
        const double v = interpolate(f, p, -x);
        return p == Parity::Odd ? -v : v;
    }
    if (x > r_.back() * (1.0 + 1e-12)) throw std::out_of_range("interpolate: point beyond r_max");
    const std::size_t c = locate(x);
    if (x == r_[c]) return f[c];
    const auto& s = cell_[c];
    const auto l = lagrange(x, s.x);
    double acc = 0.0;
    for (std::size_t k = 0; k < l.size(); ++k) acc += l[k] * gather(f, p, s, k);
    return acc;
}

std::vector<double> RadialGrid::interpolate(std::span<const double> f, Parity p,
                                            std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = interpolate(f, p, xs[i]);
    return out;
}

std::vector<double> RadialGrid::sample(const std::function<double(double)>& f) const {
    std::vector<double> out(r_.size());
    for (std::size_t i = 0; i < r_.size(); ++i) out[i] = f(r_[i]);
    return out;
}

RadialField make_field(GridPtr grid, const std::function<double(double)>& f, Parity p) {
    RadialField out{std::move(grid), {}, p};
    out.values = out.grid->sample(f);
    return out;
}

RadialField derivative(const RadialField& f, int order) {
    RadialField out{f.grid, f.grid->derivative(f.values, f.parity, order), f.parity};
    if (order % 2 == 1) out.parity = flip(f.parity);
    return out;
}

RadialField radial_laplacian(const RadialField& f) {
    if (f.parity != Parity::Even) throw std::invalid_argument("radial_laplacian: field must be even at the origin");
    const auto d1 = f.grid->derivative(f.values, Parity::Even, 1);
    const auto d2 = f.grid->derivative(f.values, Parity::Even, 2);
    RadialField out{f.grid, std::vector<double>(f.size()), Parity::Even};
    out.values[0] = 2.0 * d2[0];
    for (std::size_t i = 1; i < f.size(); ++i) out.values[i] = d2[i] + d1[i] / f.r(i);
    return out;
}

IntegralResult integrate(const RadialField& f) {
    const auto& w = f.grid->quad_weights();
    IntegralResult res;
    if (f.parity == Parity::Even) {
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) acc += w[i] * f[i];
        res.value = 2.0 * std::numbers::pi * acc;
    }
    const auto cum = f.grid->cumulative_r(f.values, f.parity);
    if (f.parity == Parity::Odd) res.value = 2.0 * std::numbers::pi * cum.back();
    const double half = f.grid->interpolate(cum, f.parity, 0.5 * f.grid->r_max());
    res.tail_estimate = 2.0 * std::numbers::pi * std::abs(cum.back() - half);
    return res;
}

RadialField partial_mass(const RadialField& f) {
    return {f.grid, f.grid->cumulative_r(f.values, f.parity), f.parity};
}

RadialField poisson_field(const RadialField& f) {
    const auto m = f.grid->cumulative_r(f.values, f.parity);
    RadialField out{f.grid, std::vector<double>(f.size(), 0.0), flip(f.parity)};
    for (std::size_t i = 1; i < f.size(); ++i) out.values[i] = m[i] / f.r(i);
    return out;
}

RadialField potential_from_gradient(const RadialField& g, Normalization n) {
    if (g.parity != Parity::Odd) throw std::invalid_argument("potential_from_gradient: gradient must be odd");
    RadialField out{g.grid, g.grid->cumulative_1(g.values, Parity::Odd), Parity::Even};
    const std::size_t N = g.size();
    const double R = g.grid->r_max();
    double shift = 0.0;
    switch (n) {
        case Normalization::ValueAtZero:
            break;
        case Normalization::LogConvolution: {
            // phi(R) = m_inf log R + int_R^inf (m_inf - m)/t dt with m = r g. A power
            // tail m_inf - m ~ c r^-p gives m_inf - m(R) = R m'(R)/p.
            std::vector<double> m(N);
            for (std::size_t i = 0; i < N; ++i) m[i] = g.r(i) * g[i];
            const auto dm = g.grid->derivative(m, Parity::Even, 1);
            double phi_R = m[N - 1] * std::log(R);
            const double d1 = dm[N - 1], d0 = dm[N - 2];
            double scale = 0.0;
            for (double x : m) scale = std::max(scale, std::abs(x));
            if (std::abs(R * d1) > 1e-14 * scale && d0 != 0.0 && (d0 > 0) == (d1 > 0)) {
                const double p = -std::log(d1 / d0) / std::log(R / g.r(N - 2)) - 1.0;
                if (p > 0.5) {
                    const double gap = R * d1 / p;
                    phi_R += gap * std::log(R) + gap / p;
                }
            }
            shift = phi_R - out.values[N - 1];
            break;
        }
        case Normalization::Decay: {
            const double g1 = g[N - 1];
            const double g0 = g[N - 2];
            double tail = 0.0;
            if (g1 != 0.0) {
                if (g0 == 0.0 || (g0 > 0) != (g1 > 0))
                    throw std::invalid_argument("potential_from_gradient: gradient tail is not of power type");
                const double p = -std::log(g1 / g0) / std::log(R / g.r(N - 2));
                if (!(p > 1.05)) throw std::invalid_argument("potential_from_gradient: gradient is not integrable");
                tail = g1 * R / (p - 1.0);
            }
            shift = -(out.values[N - 1] + tail);
            break;
        }
    }
    for (auto& v : out.values) v += shift;
    return out;
}

void write_csv(const RadialField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "r,value\n" << std::setprecision(17);
    for (std::size_t i = 0; i < f.size(); ++i) os << f.r(i) << ',' << f[i] << '\n';
}

}  // namespace kslab

#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/grid.hpp"
#include "dunkl/heatkernel.hpp"
#include "dunkl/measure.hpp"
#include "dunkl/parallel.hpp"
#include "dunkl/potential.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

namespace dunkl {

enum class GreenKind { G, G1, curlyG };

struct GreenOptions {
    double s_max = 1e3;
    double s_min = 1e-4;
    int per_decade = 64;
    /// Quadrature grid for the inner integral when N = 2; rank one integrates adaptively.
    std::shared_ptr<const SpaceGrid> grid;
};

/// Truncated s-integral over (0, s_max] plus an upper bound for the part beyond s_max.
struct GreenValue {
    double truncated = 0.0;
    double tail = 0.0;
    double total() const { return truncated + tail; }
};

namespace detail {

inline double rank1_ball_mass(double k, double x, double r) { return rank1_ball_volume(k, x, r); }

/// w(B(x, r)) for a product system: closed form in rank one, adaptive quadrature for N = 2.
inline double product_ball_volume(const HeatKernelEvaluator& ev, const Vector& x, double r) {
    if (ev.dimension() == 1) return rank1_ball_mass(ev.system().multiplicity(0), x(0), r);
    static thread_local std::vector<std::pair<std::vector<double>, WeightedMeasure>> cache;
    const std::vector<double> key(ev.system().multiplicities().begin(), ev.system().multiplicities().end());
    auto it = std::find_if(cache.begin(), cache.end(), [&](const auto& e) { return e.first == key; });
    if (it == cache.end()) {
        cache.emplace_back(key, WeightedMeasure(ev.system().root_system()));
        it = std::prev(cache.end());
    }
    return ball_volume(it->second, x, r, VolumeMethod::quadrature).value;
}

/// Intervals [c - half, c + half] for the centers, merged and clipped to [lo, hi].
inline std::vector<std::pair<double, double>> merged_windows(std::vector<double> centers, double half, double lo,
                                                             double hi) {
    std::sort(centers.begin(), centers.end());
    std::vector<std::pair<double, double>> out;
    for (double c : centers) {
        double a = std::max(lo, c - half), b = std::min(hi, c + half);
        if (!(b > a)) continue;
        if (!out.empty() && a <= out.back().second)
            out.back().second = std::max(out.back().second, b);
        else
            out.emplace_back(a, b);
    }
    return out;
}

/// Inner y-integral of a rank-one Green integrand at time s.
inline double rank1_inner(const HeatKernelEvaluator& ev, const Potential& v, double x, double s, GreenKind kind) {
    const double k = ev.system().multiplicity(0);
    const auto [lo, hi] = v.support_1d();
    if (!(hi > lo)) return 0.0;
    const double root = std::sqrt(s);
    const double half = (kind == GreenKind::G1 ? 12.0 : 6.5) * root;
    std::vector<double> centers{x};
    if (kind != GreenKind::G) centers.push_back(-x);
    const auto windows = merged_windows(centers, half, lo, hi);

    std::vector<double> cuts{0.0, x, -x};
    for (double b : v.breakpoints()) cuts.push_back(b);
    const double density_scale = std::pow(2.0, k);
    auto integrand = [&](double y) {
        const double density = density_scale * std::pow(std::abs(y), 2.0 * k);
        const double vy = v(y);
        if (vy == 0.0) return 0.0;
        switch (kind) {
            case GreenKind::G1: return ev.heat_kernel_1d(0, x, y, s) * vy * density;
            case GreenKind::G: return std::exp(-(x - y) * (x - y) / s) * vy * density;
            case GreenKind::curlyG: {
                const double d = std::abs(x) - std::abs(y);
                return std::exp(-d * d / s) * vy * density;
            }
        }
        return 0.0;
    };

    double total = 0.0;
    for (const auto& [a, b] : windows) {
        std::vector<double> pts{a, b};
        for (double c : cuts)
            if (c > a && c < b) pts.push_back(c);
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (!(pts[i + 1] > pts[i])) continue;
            total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, pts[i], pts[i + 1], 12,
                                                                                    1e-11);
        }
    }
    if (kind != GreenKind::G1) total /= rank1_ball_mass(k, x, root);
    return total;
}

/// Inner integral by grid quadrature (weights include the density).
inline double grid_inner(const HeatKernelEvaluator& ev, const Potential& v, const SpaceGrid& grid, const Vector& x,
                         double s, GreenKind kind) {
    double total = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Vector y = grid.node(j);
        const double vy = v(y);
        if (vy == 0.0) continue;
        double kern = 0.0;
        switch (kind) {
            case GreenKind::G1: kern = ev.heat_kernel(x, y, s); break;
            case GreenKind::G: kern = std::exp(-(x - y).squaredNorm() / s); break;
            case GreenKind::curlyG: kern = std::exp(-(x.cwiseAbs() - y.cwiseAbs()).squaredNorm() / s); break;
        }
        total += kern * vy * grid.weight(j);
    }
    if (kind != GreenKind::G1) total /= product_ball_volume(ev, x, std::sqrt(s));
    return total;
}

/// ||V||_{L^1(dw)}; infinite for non-vanishing constants.
inline double potential_l1(const HeatKernelEvaluator& ev, const Potential& v, const SpaceGrid* grid) {
    if (v.is_zero()) return 0.0;
    if (v.constant_value()) return std::numeric_limits<double>::infinity();
    if (ev.dimension() == 1) {
        const double k = ev.system().multiplicity(0);
        const auto [lo, hi] = v.support_1d();
        std::vector<double> cuts = v.breakpoints();
        cuts.push_back(0.0);
        const double scale = std::pow(2.0, k);
        return integrate_split([&](double y) { return v(y) * scale * std::pow(std::abs(y), 2.0 * k); }, lo, hi, cuts);
    }
    if (grid == nullptr) throw ValidationError("green: a quadrature grid is required for N = 2");
    double total = 0.0;
    for (std::size_t j = 0; j < grid->size(); ++j) total += v(grid->node(j)) * grid->weight(j);
    return total;
}

} // namespace detail

/**
 * @brief Upper bound for the s > s_max part of a Green integral.
 *
 * Uses int V h_s dw <= ||V||_1 sup h_s with sup h_s <= c^{-1} (2s)^{-N/2} for G1,
 * and w(B(x, sqrt s)) >= w(B(0, 1)) s^{N/2} for G and curlyG.
 */
inline double green_tail(const HeatKernelEvaluator& ev, const Potential& v, GreenKind kind, double s_max,
                         const SpaceGrid* grid = nullptr) {
    const double hom = ev.homogeneous_dimension();
    const bool infinite_extent = !v.support_radius().has_value();
    if (v.is_zero()) return 0.0;
    if (hom <= 2.0) {
        if (infinite_extent) throw DomainError("green: tail divergent (homogeneous dimension <= 2, infinite-extent V)");
        return std::numeric_limits<double>::infinity();
    }
    const double l1 = detail::potential_l1(ev, v, grid);
    if (std::isinf(l1)) return std::numeric_limits<double>::infinity();
    const double decay = std::pow(s_max, 1.0 - 0.5 * hom) / (0.5 * hom - 1.0);
    if (kind == GreenKind::G1) return l1 / ev.normalization_constant() * std::pow(2.0, -0.5 * hom) * decay;
    const double unit_ball = detail::product_ball_volume(ev, Vector::Zero(static_cast<Eigen::Index>(ev.dimension())), 1.0);
    return l1 / unit_ball * decay;
}

/// One Green operator at x: composite Simpson in log s on [s_min, s_max] plus s_min F(s_min) for (0, s_min).
inline GreenValue green_potential(const HeatKernelEvaluator& ev, const Potential& v, const Vector& x, GreenKind kind,
                                  const GreenOptions& opt = {}) {
    if (!(opt.s_max > 0.0)) throw ValidationError("green: s_max must be positive");
    if (!(opt.s_min > 0.0) || !(opt.s_min < opt.s_max)) throw ValidationError("green: need 0 < s_min < s_max");
    if (opt.per_decade < 1) throw ValidationError("green: per_decade must be >= 1");
    if (ev.dimension() > 2) throw ValidationError("green: N <= 2 only");
    if (ev.dimension() == 2 && !opt.grid) throw ValidationError("green: a quadrature grid is required for N = 2");
    if (!v.is_bounded()) throw ValidationError("green: potential must be bounded (truncate it first)");

    GreenValue out;
    out.tail = green_tail(ev, v, kind, opt.s_max, opt.grid.get());
    if (v.is_zero()) return out;

    auto inner = [&](double s) {
        return ev.dimension() == 1 ? detail::rank1_inner(ev, v, x(0), s, kind)
                                   : detail::grid_inner(ev, v, *opt.grid, x, s, kind);
    };
    const double decades = std::log10(opt.s_max / opt.s_min);
    auto intervals = static_cast<std::size_t>(std::ceil(opt.per_decade * decades));
    intervals += intervals % 2;
    const double u0 = std::log(opt.s_min), u1 = std::log(opt.s_max);
    const double du = (u1 - u0) / static_cast<double>(intervals);
    double sum = 0.0;
    double f_first = 0.0;
    for (std::size_t i = 0; i <= intervals; ++i) {
        const double s = std::exp(u0 + du * static_cast<double>(i));
        const double f = inner(s) * s;
        if (i == 0) f_first = f;
        const double coeff = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += coeff * f;
    }
    out.truncated = sum * du / 3.0 + f_first;
    return out;
}

struct GreenReport {
    std::vector<Vector> xs;
    std::vector<double> G, G1, curlyG;
    double s_max = 0.0;
    double tail_G = 0.0, tail_G1 = 0.0, tail_curlyG = 0.0;
    double sup_G = 0.0, sup_G1 = 0.0, sup_curlyG = 0.0;
    std::size_t argmax_G1 = 0;
    /// sup G / sup G1, sup G1 / sup curlyG, sup curlyG / sup G.
    double ratio_G_G1 = 0.0, ratio_G1_curlyG = 0.0, ratio_curlyG_G = 0.0;
};

/// All three operators over an x sweep; entries are truncated value plus tail bound.
inline GreenReport green_sup(const HeatKernelEvaluator& ev, const Potential& v, std::span<const Vector> xs,
                             const GreenOptions& opt = {}, unsigned threads = 1) {
    GreenReport rep;
    rep.xs.assign(xs.begin(), xs.end());
    rep.s_max = opt.s_max;
    const std::size_t n = xs.size();
    rep.G.assign(n, 0.0);
    rep.G1.assign(n, 0.0);
    rep.curlyG.assign(n, 0.0);
    parallel_for(n * 3, threads, [&](std::size_t job) {
        const std::size_t i = job / 3;
        const auto kind = static_cast<GreenKind>(job % 3);
        const double value = green_potential(ev, v, xs[i], kind, opt).total();
        (kind == GreenKind::G ? rep.G : kind == GreenKind::G1 ? rep.G1 : rep.curlyG)[i] = value;
    });
    rep.tail_G = green_tail(ev, v, GreenKind::G, opt.s_max, opt.grid.get());
    rep.tail_G1 = green_tail(ev, v, GreenKind::G1, opt.s_max, opt.grid.get());
    rep.tail_curlyG = green_tail(ev, v, GreenKind::curlyG, opt.s_max, opt.grid.get());
    if (n > 0) {
        rep.sup_G = *std::max_element(rep.G.begin(), rep.G.end());
        const auto it = std::max_element(rep.G1.begin(), rep.G1.end());
        rep.sup_G1 = *it;
        rep.argmax_G1 = static_cast<std::size_t>(it - rep.G1.begin());
        rep.sup_curlyG = *std::max_element(rep.curlyG.begin(), rep.curlyG.end());
    }
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN(); };
    rep.ratio_G_G1 = ratio(rep.sup_G, rep.sup_G1);
    rep.ratio_G1_curlyG = ratio(rep.sup_G1, rep.sup_curlyG);
    rep.ratio_curlyG_G = ratio(rep.sup_curlyG, rep.sup_G);
    return rep;
}

} // namespace dunkl

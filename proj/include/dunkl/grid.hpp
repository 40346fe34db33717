#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/heatkernel.hpp"
#include "dunkl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace dunkl {

/// One coordinate axis: Gauss panels on [-X, X] with weights that integrate
/// polynomial times 2^k |u|^{2k} exactly on every panel. Panels touching the
/// origin use Gauss-Jacobi rules so the singular density is folded into the rule.
struct AxisGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> panel_edges;
    double radius = 0.0;
    double multiplicity = 0.0;
};

namespace detail {

inline int panel_order(std::size_t nodes) {
    if (nodes >= 64 && nodes % 32 == 0) return 16;
    if (nodes % 16 == 0) return 8;
    throw ValidationError("grid: node count per axis must be a multiple of 16");
}

inline std::vector<double> panel_edges(double radius, std::size_t panels, std::span<const double> breakpoints) {
    std::vector<double> edges(panels + 1);
    for (std::size_t j = 0; j <= panels; ++j) edges[j] = -radius + 2.0 * radius * static_cast<double>(j) / panels;
    edges[panels / 2] = 0.0;
    std::vector<char> pinned(panels + 1, 0);
    pinned.front() = pinned.back() = pinned[panels / 2] = 1;
    for (double b : breakpoints) {
        if (!(std::abs(b) < radius) || b == 0.0) continue;
        std::size_t best = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= panels; ++j)
            if (!pinned[j] && std::abs(edges[j] - b) < gap) {
                gap = std::abs(edges[j] - b);
                best = j;
            }
        if (gap == std::numeric_limits<double>::infinity()) continue;
        const double lo = edges[best - 1], hi = edges[best + 1];
        if (b > lo && b < hi) {
            edges[best] = b;
            pinned[best] = 1;
        }
    }
    return edges;
}

} // namespace detail

inline AxisGrid make_axis_grid(double multiplicity, double radius, std::size_t nodes,
                               std::span<const double> breakpoints = {}) {
    if (!(radius > 0.0)) throw ValidationError("grid: radius must be positive");
    if (!(multiplicity >= 0.0)) throw ValidationError("grid: multiplicity must be non-negative");
    const int order = detail::panel_order(nodes);
    const std::size_t panels = nodes / static_cast<std::size_t>(order);
    if (panels % 2 != 0) throw ValidationError("grid: panel count must be even");

    AxisGrid grid;
    grid.radius = radius;
    grid.multiplicity = multiplicity;
    grid.panel_edges = detail::panel_edges(radius, panels, breakpoints);
    const double k = multiplicity;
    const double scale = std::pow(2.0, k);
    const auto legendre = quadrature::gauss_legendre(order);
    const auto jacobi = quadrature::gauss_jacobi(order, 0.0, 2.0 * k);

    for (std::size_t p = 0; p < panels; ++p) {
        const double a = grid.panel_edges[p], b = grid.panel_edges[p + 1];
        if (b == 0.0 || a == 0.0) {
            // u = sign * L (1 + s)/2 with the |u|^{2k} factor inside the rule.
            const double length = b - a;
            const double sign = a == 0.0 ? 1.0 : -1.0;
            std::vector<std::pair<double, double>> rule;
            for (std::size_t i = 0; i < jacobi.nodes.size(); ++i) {
                const double u = sign * 0.5 * length * (1.0 + jacobi.nodes[i]);
                rule.emplace_back(u, scale * jacobi.weights[i] * std::pow(0.5 * length, 2.0 * k + 1.0));
            }
            std::sort(rule.begin(), rule.end());
            for (auto [u, w] : rule) {
                grid.nodes.push_back(u);
                grid.weights.push_back(w);
            }
        } else {
            const auto rule = quadrature::mapped(legendre, a, b);
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double u = rule.nodes[i];
                grid.nodes.push_back(u);
                grid.weights.push_back(rule.weights[i] * scale * std::pow(std::abs(u), 2.0 * k));
            }
        }
    }
    return grid;
}

/**
 * @brief Quadrature nodes for w-weighted integrals on a box [-X, X]^N, N in {1, 2}.
 *
 * Weights already include the density, so sum_j f(node_j) weight_j approximates
 * the integral of f dw. Nodes of a 2-d grid are stored row-major.
 */
class SpaceGrid {
public:
    static SpaceGrid line(double multiplicity, double radius, std::size_t nodes, std::span<const double> breakpoints = {}) {
        return SpaceGrid({make_axis_grid(multiplicity, radius, nodes, breakpoints)});
    }

    static SpaceGrid for_system(const ProductRank1System& system, double radius, std::size_t nodes_per_axis,
                                std::span<const double> breakpoints = {}) {
        if (system.dimension() > 2) throw ValidationError("grid: only 1-d and 2-d grids are supported");
        std::vector<AxisGrid> axes;
        for (std::size_t i = 0; i < system.dimension(); ++i)
            axes.push_back(make_axis_grid(system.multiplicity(i), radius, nodes_per_axis, breakpoints));
        return SpaceGrid(std::move(axes));
    }

    std::size_t dimension() const { return axes_.size(); }
    std::size_t size() const { return weights_.size(); }
    double radius() const { return axes_.front().radius; }
    const AxisGrid& axis(std::size_t i) const { return axes_[i]; }
    std::span<const double> weights() const { return weights_; }
    double weight(std::size_t i) const { return weights_[i]; }

    Vector node(std::size_t i) const {
        if (axes_.size() == 1) return make_vector({axes_[0].nodes[i]});
        const std::size_t n2 = axes_[1].nodes.size();
        return make_vector({axes_[0].nodes[i / n2], axes_[1].nodes[i % n2]});
    }

    /// Coordinate of node i along axis a.
    double coordinate(std::size_t i, std::size_t a) const {
        if (axes_.size() == 1) return axes_[0].nodes[i];
        const std::size_t n2 = axes_[1].nodes.size();
        return a == 0 ? axes_[0].nodes[i / n2] : axes_[1].nodes[i % n2];
    }

    double max_abs_coordinate(std::size_t i) const {
        double m = 0.0;
        for (std::size_t a = 0; a < axes_.size(); ++a) m = std::max(m, std::abs(coordinate(i, a)));
        return m;
    }

    /// Node indices with every coordinate inside [-limit, limit].
    std::vector<std::size_t> window(double limit) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < size(); ++i)
            if (max_abs_coordinate(i) <= limit) idx.push_back(i);
        return idx;
    }

private:
    explicit SpaceGrid(std::vector<AxisGrid> axes) : axes_(std::move(axes)) {
        if (axes_.size() == 1) {
            weights_ = axes_[0].weights;
        } else {
            for (double w0 : axes_[0].weights)
                for (double w1 : axes_[1].weights) weights_.push_back(w0 * w1);
        }
    }

    std::vector<AxisGrid> axes_;
    std::vector<double> weights_;
};

} // namespace dunkl

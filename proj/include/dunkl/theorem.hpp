#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/green.hpp"
#include "dunkl/schrodinger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dunkl {

struct TheoremConfig {
    double t_min = 0.1, t_max = 100.0;
    std::size_t t_points = 20;
    double x_min = -6.0, x_max = 6.0;
    std::size_t x_points = 13;
    std::vector<double> c_values{0.25, 0.5, 1.0};
    /// The c whose fitted C decides the lower-bound flag.
    double flag_c = 0.25;
    double delta_floor = 1e-3;
    std::size_t grid_nodes = 2048;
    double min_radius = 12.0;
    /// Strang step; times below spectral_min_steps * step run the positive chain directly.
    double step = 0.05;
    std::size_t spectral_min_steps = 40;
    double s_max = 1e3;
    double green_tol = 1e-3;
    double fit_tol = 0.05;
    unsigned threads = 1;

    void validate() const {
        if (!(t_min > 0.0) || !(t_max > t_min) || t_points < 2) throw ValidationError("theorem: need 0 < t_min < t_max and t_points >= 2");
        if (!(x_max > x_min) || x_points < 2) throw ValidationError("theorem: need x_min < x_max and x_points >= 2");
        if (c_values.empty()) throw ValidationError("theorem: c_values must not be empty");
        for (double c : c_values)
            if (!(c > 0.0 && c <= 1.0)) throw ValidationError("theorem: every c must lie in (0, 1]");
        if (std::find(c_values.begin(), c_values.end(), flag_c) == c_values.end())
            throw ValidationError("theorem: flag_c must be one of c_values");
        if (!(delta_floor > 0.0) || !(green_tol > 0.0) || !(fit_tol > 0.0)) throw ValidationError("theorem: tolerances must be positive");
        if (!(s_max > 0.0)) throw ValidationError("theorem: s_max must be positive");
        if (!(step > 0.0) || !(t_min >= 2.0 * step)) throw ValidationError("theorem: need 0 < step <= t_min / 2");
    }

    std::vector<double> times() const {
        std::vector<double> ts(t_points);
        for (std::size_t i = 0; i < t_points; ++i)
            ts[i] = t_min * std::pow(t_max / t_min, static_cast<double>(i) / static_cast<double>(t_points - 1));
        return ts;
    }
    std::vector<Vector> points() const {
        std::vector<Vector> xs;
        for (std::size_t i = 0; i < x_points; ++i)
            xs.push_back(make_vector({x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(x_points - 1)}));
        return xs;
    }
    /// Box radius: the sweep points stay 10 sqrt(t_max) inside the edge.
    double radius() const {
        return std::max(min_radius, std::max(std::abs(x_min), std::abs(x_max)) + 10.0 * std::sqrt(t_max));
    }
};

/// Fitted C for one c: C = max h_{ct}(x,y) / k_t(x,y) over the sweep, on three variants.
struct FittedLowerBound {
    double c = 0.0;
    double C = 0.0;         // full horizon, base grid
    double C_refined = 0.0; // full horizon, doubled grid
    double C_half = 0.0;    // t <= t_max / 2, base grid
    double refine_change = 0.0;
    double horizon_change = 0.0;
    double argmax_t = 0.0, argmax_x = 0.0, argmax_y = 0.0;
};

struct TheoremReport {
    double delta_min = 0.0;
    double delta_argmin_t = 0.0, delta_argmin_x = 0.0;
    double green_sup = 0.0, green_sup_extended = 0.0, green_change = 0.0, green_tail = 0.0;
    std::vector<FittedLowerBound> fits;
    bool green_bounded = false, mass_bounded = false, lower_bound = false;
    bool consistent = false;
    std::string diagnostics;

    bool failed() const { return !consistent; }
    const FittedLowerBound& fit_for(double c) const {
        for (const auto& f : fits)
            if (f.c == c) return f;
        throw ValidationError("theorem: no fit for the requested c");
    }
};

namespace detail {

inline double relative_change(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) return std::numeric_limits<double>::infinity();
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

/// Per-time Strang kernel values at the sweep points and masses there.
struct SweepSlice {
    double t = 0.0;
    Matrix kernel;
    std::vector<double> mass;
};

/// Short times use the positive Trotter chain (relative accuracy for tiny kernel
/// values); longer times use one spectral decomposition of the same Strang step.
inline std::vector<SweepSlice> sweep_kernels(const HeatKernelEvaluator& ev, const Potential& v, const TheoremConfig& cfg,
                                             std::size_t nodes) {
    const auto xs = cfg.points();
    const auto grid = std::make_shared<const SpaceGrid>(
        SpaceGrid::line(ev.system().multiplicity(0), cfg.radius(), nodes, v.breakpoints()));
    const double switch_time = static_cast<double>(cfg.spectral_min_steps) * cfg.step;
    std::unique_ptr<SpectralStrangChain> spectral;
    std::vector<SweepSlice> out;
    for (double t : cfg.times()) {
        if (t < switch_time) {
            const auto n = static_cast<std::size_t>(std::max(2.0, std::round(t / cfg.step)));
            TrotterChain chain(grid, ev, v, t, n, {Splitting::strang, 1e-6, cfg.threads});
            auto vals = chain.kernel_values(xs, xs);
            out.push_back({t, std::move(vals.kernel), std::move(vals.mass)});
        } else {
            if (!spectral) spectral = std::make_unique<SpectralStrangChain>(grid, ev, v, cfg.step, xs, cfg.threads);
            out.push_back({t, spectral->kernel(t), spectral->mass(t)});
        }
    }
    return out;
}

inline void fit_c(const HeatKernelEvaluator& ev, const std::vector<Vector>& xs, const std::vector<SweepSlice>& slices,
                  double c, double t_limit, double& best, double* at_t = nullptr, double* at_x = nullptr,
                  double* at_y = nullptr) {
    best = 0.0;
    for (const auto& sl : slices) {
        if (sl.t > t_limit * (1.0 + 1e-12)) continue;
        for (std::size_t a = 0; a < xs.size(); ++a)
            for (std::size_t b = 0; b < xs.size(); ++b) {
                const double kv = sl.kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                const double h = ev.heat_kernel(xs[a], xs[b], c * sl.t);
                const double ratio = kv > 0.0 ? h / kv : std::numeric_limits<double>::infinity();
                if (ratio > best || std::isinf(ratio)) {
                    best = ratio;
                    if (at_t) *at_t = sl.t;
                    if (at_x) *at_x = xs[a](0);
                    if (at_y) *at_y = xs[b](0);
                }
            }
    }
}

} // namespace detail

/**
 * @brief Numerical check of the equivalence between a Gaussian-type lower bound
 * h_{ct} <= C k_t, a uniform mass floor, and Green boundedness of V.
 *
 * (c) sup_x G1(V)(x) finite and stable when s_max doubles;
 * (b) inf over the (x, t) sweep of the kernel mass >= delta_floor;
 * (a) fitted C for flag_c finite and stable under grid doubling and under
 *     halving the time horizon (a growing C signals no uniform constant).
 * The three flags must agree; a disagreement yields a report marked failed.
 */
inline TheoremReport verify_theorem(const HeatKernelEvaluator& ev, const Potential& v, const TheoremConfig& cfg) {
    cfg.validate();
    if (ev.dimension() != 1) throw ValidationError("verify_theorem: rank-one systems only");
    if (!(ev.homogeneous_dimension() > 2.0)) throw ValidationError("verify_theorem: homogeneous dimension must exceed 2");
    if (!v.is_bounded()) throw ValidationError("verify_theorem: potential must be bounded");
    v.check_dimension(1);

    TheoremReport rep;
    const auto xs = cfg.points();

    // (c) Green boundedness.
    GreenOptions gopt;
    gopt.s_max = cfg.s_max;
    const auto g1 = green_sup(ev, v, xs, gopt, cfg.threads);
    gopt.s_max = 2.0 * cfg.s_max;
    const auto g2 = green_sup(ev, v, xs, gopt, cfg.threads);
    rep.green_sup = g1.sup_G1;
    rep.green_sup_extended = g2.sup_G1;
    rep.green_tail = g1.tail_G1;
    rep.green_change = detail::relative_change(g1.sup_G1, g2.sup_G1);
    rep.green_bounded = std::isfinite(g1.sup_G1) && std::isfinite(g2.sup_G1) && rep.green_change <= cfg.green_tol;

    // (b) mass floor and (a) fitted constants share one sweep.
    const auto base = detail::sweep_kernels(ev, v, cfg, cfg.grid_nodes);
    const auto fine = detail::sweep_kernels(ev, v, cfg, 2 * cfg.grid_nodes);
    rep.delta_min = std::numeric_limits<double>::infinity();
    for (const auto& sl : base)
        for (std::size_t a = 0; a < xs.size(); ++a)
            if (sl.mass[a] < rep.delta_min) {
                rep.delta_min = sl.mass[a];
                rep.delta_argmin_t = sl.t;
                rep.delta_argmin_x = xs[a](0);
            }
    rep.mass_bounded = rep.delta_min >= cfg.delta_floor;

    for (double c : cfg.c_values) {
        FittedLowerBound f;
        f.c = c;
        detail::fit_c(ev, xs, base, c, cfg.t_max, f.C, &f.argmax_t, &f.argmax_x, &f.argmax_y);
        detail::fit_c(ev, xs, fine, c, cfg.t_max, f.C_refined);
        detail::fit_c(ev, xs, base, c, 0.5 * cfg.t_max, f.C_half);
        f.refine_change = detail::relative_change(f.C, f.C_refined);
        f.horizon_change = detail::relative_change(f.C, f.C_half);
        rep.fits.push_back(f);
    }
    const auto& flag_fit = rep.fit_for(cfg.flag_c);
    rep.lower_bound = std::isfinite(flag_fit.C) && flag_fit.refine_change <= cfg.fit_tol &&
                      flag_fit.horizon_change <= cfg.fit_tol;

    rep.consistent = rep.green_bounded == rep.mass_bounded && rep.mass_bounded == rep.lower_bound;
    if (!rep.consistent) {
        std::ostringstream msg;
        msg.precision(6);
        msg << "FAILED: flags disagree; green_bounded=" << rep.green_bounded << " (sup " << rep.green_sup << " -> "
            << rep.green_sup_extended << ", change " << rep.green_change << ", tail " << rep.green_tail
            << "); mass_bounded=" << rep.mass_bounded << " (delta_min " << rep.delta_min << " at t=" << rep.delta_argmin_t
            << ", x=" << rep.delta_argmin_x << "); lower_bound=" << rep.lower_bound << " (C " << flag_fit.C
            << ", refined " << flag_fit.C_refined << ", half horizon " << flag_fit.C_half << ")";
        rep.diagnostics = msg.str();
    }
    return rep;
}

} // namespace dunkl

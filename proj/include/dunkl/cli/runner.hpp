#pragma once

#include "dunkl/cli/config.hpp"
#include "dunkl/cli/table.hpp"
#include "dunkl/feynmankac.hpp"
#include "dunkl/green.hpp"
#include "dunkl/heatkernel.hpp"
#include "dunkl/schrodinger.hpp"
#include "dunkl/theorem.hpp"

#include <chrono>
#include <ctime>
#include <limits>
#include <string>
#include <string_view>

#ifndef DUNKL_VERSION
#define DUNKL_VERSION "0.0.0"
#endif

namespace dunkl::cli {

struct RunOptions {
    bool timestamp = true;
};

namespace detail {

inline std::vector<double> coords(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline GridPtr make_grid(const ExperimentConfig& cfg, std::vector<double> breakpoints) {
    return std::make_shared<const SpaceGrid>(
        SpaceGrid::for_system(cfg.evaluator->system(), cfg.grid_radius, cfg.grid_nodes, breakpoints));
}

inline ResultTable run_lambda(const ExperimentConfig& cfg) {
    ResultTable table({"x", "y", "t", "n_xy", "d_xy", "lambda", "lambda_tilde"});
    const auto& system = *cfg.system;
    const auto group = build_group(system);
    for (double t : cfg.times)
        for (const auto& [x, y] : cfg.points)
            table.add_row({coords(x), coords(y), t, static_cast<double>(reflection_count(system, group, x, y)),
                           orbit_distance(group, x, y),
                           lambda(system, group, x, y, t, LambdaRange::full, cfg.lambda_method),
                           lambda(system, group, x, y, t, LambdaRange::reduced, cfg.lambda_method)});
    return table;
}

inline ResultTable run_heat(const ExperimentConfig& cfg) {
    ResultTable table({"x", "y", "t", "h", "bound_lower", "bound_upper", "ratio"});
    const auto& ev = *cfg.evaluator;
    const HeatBounds bounds(*cfg.system);
    for (double t : cfg.times)
        for (const auto& [x, y] : cfg.points) {
            const double h = ev.heat_kernel(x, y, t);
            const auto b = bounds.evaluate(x, y, t, cfg.bounds);
            table.add_row({coords(x), coords(y), t, h, b.lower, b.upper, h / b.upper});
        }
    return table;
}

inline ResultTable run_schrodinger(const ExperimentConfig& cfg) {
    ResultTable table({"x", "y", "t", "n", "k_V", "h", "ratio", "duhamel_residual"});
    const auto& ev = *cfg.evaluator;
    const auto& v = cfg.potential.potential;
    const auto grid = make_grid(cfg, v.breakpoints());
    std::vector<Vector> xs, ys;
    for (const auto& [x, y] : cfg.points) {
        xs.push_back(x);
        ys.push_back(y);
    }
    SchrodingerOptions sopt;
    sopt.tol = cfg.trotter_tol;
    sopt.max_steps = cfg.trotter_max_steps;
    sopt.splitting = Splitting::strang;
    sopt.threads = cfg.threads;
    for (double t : cfg.times) {
        const auto result = schrodinger_kernel(grid, ev, v, t, sopt);
        const Potential used = std::isfinite(result.truncation_level) ? v.truncated(result.truncation_level) : v;
        const auto n = std::max<std::size_t>(result.steps, 1);
        const TrotterChain chain(grid, ev, used, t, n, {Splitting::strang, 1e-6, cfg.threads});
        const auto values = chain.kernel_values(xs, ys);
        // The free chain on the same grid must reproduce h_t at the requested points.
        const TrotterChain free(grid, ev, Potential::constant(0.0), t, n, {Splitting::strang, 1e-6, cfg.threads});
        const auto free_values = free.kernel_values(xs, ys);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double h = ev.heat_kernel(xs[i], ys[i], t);
            const double err = std::abs(free_values.kernel(ii, ii) - h) / h;
            if (!(err <= cfg.trotter_tol))
                throw DomainError("domain too small or grid too coarse: free chain differs from h_t by " +
                                  format_real(err) + " (relative) at x=" + format_real(xs[i](0)) +
                                  ", y=" + format_real(ys[i](0)) + ", t=" + format_real(t));
        }
        const double residual =
            duhamel_residual(grid, ev, used, t, {cfg.duhamel_steps, static_cast<int>(cfg.duhamel_s_nodes), cfg.threads, cfg.duhamel_max_tau});
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double k = values.kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
            const double h = ev.heat_kernel(xs[i], ys[i], t);
            table.add_row({coords(xs[i]), coords(ys[i]), t, static_cast<double>(n), k, h, h > 0.0 ? k / h : 0.0, residual});
        }
    }
    return table;
}

inline ResultTable run_green(const ExperimentConfig& cfg) {
    ResultTable table({"x", "G", "G1", "curlyG", "ratio_G_G1", "ratio_G1_curlyG", "ratio_curlyG_G"});
    const auto& ev = *cfg.evaluator;
    const auto& v = cfg.potential.potential;
    GreenOptions gopt;
    gopt.s_max = cfg.green_s_max;
    gopt.s_min = cfg.green_s_min;
    gopt.per_decade = cfg.green_per_decade;
    if (ev.dimension() > 1) gopt.grid = make_grid(cfg, v.breakpoints());
    const auto rep = green_sup(ev, v, cfg.green_points, gopt, cfg.threads);
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : std::numeric_limits<double>::infinity(); };
    for (std::size_t i = 0; i < rep.xs.size(); ++i)
        table.add_row({coords(rep.xs[i]), rep.G[i], rep.G1[i], rep.curlyG[i], ratio(rep.G[i], rep.G1[i]),
                       ratio(rep.G1[i], rep.curlyG[i]), ratio(rep.curlyG[i], rep.G[i])});
    table.add_row({std::string("sup"), rep.sup_G, rep.sup_G1, rep.sup_curlyG, rep.ratio_G_G1, rep.ratio_G1_curlyG,
                   rep.ratio_curlyG_G});
    table.provenance.emplace_back("s_max", format_real(rep.s_max));
    table.provenance.emplace_back("tail_G1", format_real(rep.tail_G1));
    return table;
}

inline ResultTable run_fk(const ExperimentConfig& cfg) {
    ResultTable table({"x", "t", "mean", "stderr", "trotter_value", "z_score"});
    const auto& ev = *cfg.evaluator;
    const auto& v = cfg.potential.potential;
    const auto& f = cfg.fk_f.potential;
    FKOptions opt;
    opt.sampler = {cfg.fk_radius, cfg.fk_resolution, cfg.fk_clip_tol};
    opt.threads = cfg.threads;
    const auto est = fk_estimate(ev, v, [&](const Vector& p) { return f(p); }, cfg.fk_x, cfg.fk_t, cfg.fk_steps,
                                 cfg.fk_paths, cfg.seed, opt);

    // The left-product chain has exactly the discrete Feynman-Kac expectation.
    auto breaks = v.breakpoints();
    for (double b : f.breakpoints()) breaks.push_back(b);
    const auto grid = make_grid(cfg, breaks);
    const TrotterChain chain(grid, ev, v, cfg.fk_t, cfg.fk_steps, {Splitting::left, 1e-6, cfg.threads});
    Eigen::VectorXd fn(static_cast<Eigen::Index>(grid->size()));
    for (std::size_t j = 0; j < grid->size(); ++j) fn(static_cast<Eigen::Index>(j)) = f(grid->node(j));
    const double trotter = chain.apply(fn, std::span<const Vector>(&cfg.fk_x, 1)).front();

    double z = 0.0;
    if (est.standard_error > 0.0) z = (est.mean - trotter) / est.standard_error;
    else if (est.mean != trotter) z = est.mean > trotter ? std::numeric_limits<double>::infinity()
                                                         : -std::numeric_limits<double>::infinity();
    table.add_row({coords(cfg.fk_x), cfg.fk_t, est.mean, est.standard_error, trotter, z});
    table.provenance.emplace_back("paths", std::to_string(est.n_paths));
    table.provenance.emplace_back("steps", std::to_string(est.n_steps));
    return table;
}

inline ResultTable run_theorem(const ExperimentConfig& cfg) {
    ResultTable table({"key", "value"});
    const auto rep = verify_theorem(*cfg.evaluator, cfg.potential.potential, cfg.theorem);
    auto flag = [](bool b) { return Cell(std::string(b ? "true" : "false")); };
    table.add_row({std::string("delta_min"), rep.delta_min});
    table.add_row({std::string("delta_argmin_t"), rep.delta_argmin_t});
    table.add_row({std::string("delta_argmin_x"), rep.delta_argmin_x});
    table.add_row({std::string("green_sup"), rep.green_sup});
    table.add_row({std::string("green_sup_extended"), rep.green_sup_extended});
    table.add_row({std::string("green_change"), rep.green_change});
    table.add_row({std::string("green_tail"), rep.green_tail});
    for (const auto& fit : rep.fits) {
        const std::string suffix = "(c=" + format_real(fit.c) + ")";
        table.add_row({"C" + suffix, fit.C});
        table.add_row({"C_refined" + suffix, fit.C_refined});
        table.add_row({"C_half_horizon" + suffix, fit.C_half});
        table.add_row({"refine_change" + suffix, fit.refine_change});
        table.add_row({"horizon_change" + suffix, fit.horizon_change});
    }
    table.add_row({std::string("green_bounded"), flag(rep.green_bounded)});
    table.add_row({std::string("mass_bounded"), flag(rep.mass_bounded)});
    table.add_row({std::string("lower_bound"), flag(rep.lower_bound)});
    table.add_row({std::string("consistent"), flag(rep.consistent)});
    if (!rep.consistent) {
        table.add_row({std::string("diagnostics"), rep.diagnostics});
        table.consistency_failure = rep.diagnostics;
    }
    return table;
}

} // namespace detail

/// Dispatches one subcommand; every table carries the config hash and tool version.
inline ResultTable run_experiment(const ExperimentConfig& cfg, std::string_view subcommand, const RunOptions& opt = {}) {
    ResultTable table;
    if (subcommand == "lambda") table = detail::run_lambda(cfg);
    else if (subcommand == "heat") table = detail::run_heat(cfg);
    else if (subcommand == "schrodinger") table = detail::run_schrodinger(cfg);
    else if (subcommand == "green") table = detail::run_green(cfg);
    else if (subcommand == "fk") table = detail::run_fk(cfg);
    else if (subcommand == "verify-theorem") table = detail::run_theorem(cfg);
    else throw ValidationError("unknown subcommand '" + std::string(subcommand) + "'");

    std::vector<std::pair<std::string, std::string>> prov{
        {"config_hash", hash_hex(config_hash(cfg.effective))},
        {"tool_version", DUNKL_VERSION},
        {"subcommand", std::string(subcommand)},
        {"seed", std::to_string(cfg.seed)}};
    if (opt.timestamp) prov.emplace_back("timestamp", detail::utc_timestamp());
    prov.insert(prov.end(), table.provenance.begin(), table.provenance.end());
    table.provenance = std::move(prov);
    return table;
}

} // namespace dunkl::cli

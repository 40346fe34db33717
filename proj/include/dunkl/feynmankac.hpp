#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/heatkernel.hpp"
#include "dunkl/parallel.hpp"
#include "dunkl/potential.hpp"
#include "dunkl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

namespace dunkl {

/// Inverse CDF of y -> h_s(x, y) w(y) along one axis, tabulated on [-R, R].
struct TransitionTable {
    std::vector<double> knots; // 0 is always a knot
    std::vector<double> cdf;   // cdf.front() == 0, cdf.back() == 1
    double clip_mass = 0.0;

    double quantile(double u) const {
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t j = static_cast<std::size_t>(it - cdf.begin());
        j = std::clamp<std::size_t>(j, 1, cdf.size() - 1);
        const double lo = cdf[j - 1], hi = cdf[j];
        const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
        return knots[j - 1] + frac * (knots[j] - knots[j - 1]);
    }
};

struct SamplerOptions {
    double radius = 12.0;
    std::size_t resolution = 4096; // table cells, even
    double clip_tol = 1e-6;
};

/**
 * @brief Exact-density sampler for one chain step of length s on a product system.
 *
 * Tables are built per axis at the source coordinate rounded to the table spacing
 * and shared between threads; construction is deterministic, so which thread
 * builds a table does not affect any draw.
 */
class TransitionSampler {
public:
    TransitionSampler(const HeatKernelEvaluator& ev, double s, SamplerOptions opt = {})
        : ev_(&ev), s_(s), opt_(opt) {
        if (!(s > 0.0)) throw DomainError("TransitionSampler: step must be positive");
        if (!(opt.radius > 0.0)) throw ValidationError("TransitionSampler: radius must be positive");
        if (opt.resolution < 16 || opt.resolution % 2 != 0)
            throw ValidationError("TransitionSampler: resolution must be even and >= 16");
        spacing_ = 2.0 * opt.radius / static_cast<double>(opt.resolution);
        legendre_ = quadrature::gauss_legendre(6);
        jacobi_.resize(ev.dimension());
        for (std::size_t a = 0; a < ev.dimension(); ++a)
            jacobi_[a] = quadrature::gauss_jacobi(8, 0.0, 2.0 * ev.system().multiplicity(a));
    }

    double step() const { return s_; }
    double radius() const { return opt_.radius; }
    std::size_t dimension() const { return ev_->dimension(); }

    std::shared_ptr<const TransitionTable> table(std::size_t axis, double x) const {
        if (std::abs(x) > opt_.radius) throw DomainError("domain too small: chain left the sampling box");
        const long long cell = std::llround(x / spacing_);
        const std::uint64_t key = (static_cast<std::uint64_t>(axis) << 48) ^ static_cast<std::uint64_t>(cell);
        {
            std::shared_lock lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        auto built = std::make_shared<const TransitionTable>(build(axis, static_cast<double>(cell) * spacing_));
        std::unique_lock lock(mutex_);
        return cache_.try_emplace(key, std::move(built)).first->second;
    }

    /// One draw given the uniforms (one per coordinate).
    Vector draw(const Vector& x, std::span<const double> uniforms) const {
        Vector y(x.size());
        for (Eigen::Index a = 0; a < x.size(); ++a)
            y(a) = table(static_cast<std::size_t>(a), x(a))->quantile(uniforms[static_cast<std::size_t>(a)]);
        return y;
    }

private:
    TransitionTable build(std::size_t axis, double x) const {
        const double k = ev_->system().multiplicity(axis);
        const double scale = std::pow(2.0, k);
        const std::size_t cells = opt_.resolution;
        TransitionTable tab;
        tab.knots.resize(cells + 1);
        for (std::size_t i = 0; i <= cells; ++i) tab.knots[i] = -opt_.radius + spacing_ * static_cast<double>(i);
        tab.knots[cells / 2] = 0.0;

        // Skip cells where the Gaussian factor is negligible in both chambers.
        const double reach = std::sqrt(4.0 * s_ * 50.0);
        std::vector<double> mass(cells, 0.0);
        for (std::size_t i = 0; i < cells; ++i) {
            const double a = tab.knots[i], b = tab.knots[i + 1];
            const double near = std::min(std::abs(std::abs(a) - std::abs(x)), std::abs(std::abs(b) - std::abs(x)));
            const bool straddles = (std::abs(a) - std::abs(x)) * (std::abs(b) - std::abs(x)) <= 0.0;
            if (!straddles && near > reach) continue;
            double m = 0.0;
            if (a == 0.0 || b == 0.0) {
                const double len = b - a, sign = a == 0.0 ? 1.0 : -1.0;
                const auto& r = jacobi_[axis];
                for (std::size_t q = 0; q < r.nodes.size(); ++q) {
                    const double u = sign * 0.5 * len * (1.0 + r.nodes[q]);
                    m += r.weights[q] * ev_->heat_kernel_1d(axis, x, u, s_);
                }
                m *= scale * std::pow(0.5 * len, 2.0 * k + 1.0);
            } else {
                const auto r = quadrature::mapped(legendre_, a, b);
                for (std::size_t q = 0; q < r.nodes.size(); ++q)
                    m += r.weights[q] * ev_->heat_kernel_1d(axis, x, r.nodes[q], s_) * scale *
                         std::pow(std::abs(r.nodes[q]), 2.0 * k);
            }
            mass[i] = m;
        }
        tab.cdf.assign(cells + 1, 0.0);
        quadrature::CompensatedSum acc;
        for (std::size_t i = 0; i < cells; ++i) {
            acc.add(mass[i]);
            tab.cdf[i + 1] = acc.value();
        }
        const double inside = tab.cdf.back();
        tab.clip_mass = std::max(0.0, 1.0 - inside);
        if (tab.clip_mass > opt_.clip_tol)
            throw DomainError("domain too small: transition clip mass " + std::to_string(tab.clip_mass) +
                              " exceeds tolerance at x=" + std::to_string(x));
        for (double& c : tab.cdf) c /= inside;
        tab.cdf.back() = 1.0;
        return tab;
    }

    const HeatKernelEvaluator* ev_;
    double s_;
    SamplerOptions opt_;
    double spacing_ = 0.0;
    quadrature::Rule legendre_;
    std::vector<quadrature::Rule> jacobi_;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<std::uint64_t, std::shared_ptr<const TransitionTable>> cache_;
};

/// Independent stream per (seed, path index).
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform in (0, 1) from the top 53 bits; identical on every platform.
inline double uniform_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline Vector sample_transition(const TransitionSampler& sampler, const Vector& x, std::mt19937_64& rng) {
    std::vector<double> u(static_cast<std::size_t>(x.size()));
    for (double& v : u) v = uniform_open(rng);
    return sampler.draw(x, u);
}

struct PathSample {
    std::vector<double> times;
    std::vector<Vector> states;
};

/// Markov chain X_0 = x, X_k ~ h_{t/n}(X_{k-1}, .) dw.
inline PathSample sample_path(const TransitionSampler& sampler, const Vector& x, double t, std::size_t n,
                              std::mt19937_64& rng) {
    if (n < 1) throw ValidationError("sample_path: n must be >= 1");
    if (std::abs(sampler.step() - t / static_cast<double>(n)) > 1e-12 * t)
        throw ValidationError("sample_path: sampler step must equal t / n");
    PathSample p;
    p.times.reserve(n + 1);
    p.states.reserve(n + 1);
    p.times.push_back(0.0);
    p.states.push_back(x);
    for (std::size_t k = 1; k <= n; ++k) {
        p.times.push_back(t * static_cast<double>(k) / static_cast<double>(n));
        p.states.push_back(sample_transition(sampler, p.states.back(), rng));
    }
    return p;
}

struct FKEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
};

struct FKOptions {
    SamplerOptions sampler{};
    unsigned threads = 1;
};

/**
 * @brief Monte Carlo mean of exp(-(t/n) sum_{k=1}^n V(X_k)) f(X_n) over n_paths chains.
 *
 * Weights are stored per path index and reduced pairwise, so the estimate is
 * bit-identical for any worker count.
 */
inline FKEstimate fk_estimate(const HeatKernelEvaluator& ev, const Potential& v, const std::function<double(const Vector&)>& f,
                              const Vector& x, double t, std::size_t n, std::size_t n_paths, std::uint64_t seed,
                              const FKOptions& opt = {}) {
    if (!(t > 0.0)) throw DomainError("fk_estimate: t must be positive");
    if (n < 1) throw ValidationError("fk_estimate: n must be >= 1");
    if (n_paths < 2) throw ValidationError("fk_estimate: need at least two paths");
    if (!v.is_bounded()) throw ValidationError("fk_estimate: potential must be bounded");
    const double tau = t / static_cast<double>(n);
    TransitionSampler sampler(ev, tau, opt.sampler);

    std::vector<double> weights(n_paths);
    parallel_for(n_paths, opt.threads, [&](std::size_t p) {
        auto rng = path_rng(seed, p);
        Vector state = x;
        std::vector<double> potential(n);
        for (std::size_t k = 0; k < n; ++k) {
            state = sample_transition(sampler, state, rng);
            potential[k] = v(state);
        }
        const double value = f(state);
        if (!std::isfinite(value)) throw NumericError("fk_estimate: f is not finite along a path");
        weights[p] = std::exp(-tau * pairwise_sum(potential)) * value;
    });

    FKEstimate est;
    est.n_paths = n_paths;
    est.n_steps = n;
    est.seed = seed;
    // Centred on the first weight so identical weights give an exact mean.
    std::vector<double> centred(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) centred[p] = weights[p] - weights[0];
    est.mean = weights[0] + pairwise_sum(centred) / static_cast<double>(n_paths);
    std::vector<double> sq(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) sq[p] = (weights[p] - est.mean) * (weights[p] - est.mean);
    const double var = pairwise_sum(sq) / static_cast<double>(n_paths - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(n_paths));
    return est;
}

/// Right-continuous step function on [a, b]: values[i] on [breaks[i-1], breaks[i]).
class CadlagPath {
public:
    CadlagPath(double a, double b, std::vector<double> breaks, std::vector<double> values)
        : a_(a), b_(b), breaks_(std::move(breaks)), values_(std::move(values)) {
        if (!(a < b)) throw ValidationError("CadlagPath: need a < b");
        if (values_.size() != breaks_.size() + 1) throw ValidationError("CadlagPath: need one more value than breakpoints");
        for (std::size_t i = 0; i < breaks_.size(); ++i) {
            if (!(breaks_[i] > a_ && breaks_[i] < b_)) throw ValidationError("CadlagPath: breakpoints must lie in (a, b)");
            if (i > 0 && !(breaks_[i] > breaks_[i - 1])) throw ValidationError("CadlagPath: breakpoints must increase");
        }
    }

    double a() const { return a_; }
    double b() const { return b_; }
    std::span<const double> breaks() const { return breaks_; }
    std::span<const double> values() const { return values_; }

    double operator()(double t) const {
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
        return values_[static_cast<std::size_t>(it - breaks_.begin())];
    }

    double integral() const {
        double total = 0.0, left = a_;
        for (std::size_t i = 0; i < breaks_.size(); ++i) {
            total += values_[i] * (breaks_[i] - left);
            left = breaks_[i];
        }
        return total + values_.back() * (b_ - left);
    }

    /// J_f at each breakpoint.
    double jump(std::size_t i) const { return std::abs(values_[i + 1] - values_[i]); }

private:
    double a_, b_;
    std::vector<double> breaks_, values_;
};

/// Left-endpoint Riemann sum ((b - a)/n) sum_{k<n} f(a + k (b - a)/n).
template <class F>
double riemann_sum(const F& f, double a, double b, std::size_t n) {
    if (!(a < b)) throw ValidationError("riemann_sum: need a < b");
    if (n < 1) throw ValidationError("riemann_sum: n must be >= 1");
    const double h = (b - a) / static_cast<double>(n);
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) terms[k] = f(a + static_cast<double>(k) * h);
    return h * pairwise_sum(terms);
}

struct RiemannComparison {
    double sum = 0.0;
    double exact = 0.0;
    double error() const { return std::abs(sum - exact); }
};

inline RiemannComparison riemann_sum(const CadlagPath& f, std::size_t n) {
    return {riemann_sum([&](double t) { return f(t); }, f.a(), f.b(), n), f.integral()};
}

/// Breakpoints with jump magnitude >= eps.
inline std::vector<double> jump_points(const CadlagPath& f, double eps) {
    if (!(eps > 0.0)) throw ValidationError("jump_points: eps must be positive");
    std::vector<double> out;
    for (std::size_t i = 0; i < f.breaks().size(); ++i)
        if (f.jump(i) >= eps) out.push_back(f.breaks()[i]);
    return out;
}

} // namespace dunkl

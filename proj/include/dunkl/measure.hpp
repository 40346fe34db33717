#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/rootsystems.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace dunkl {

/// The measure dw = w(x) dx attached to a root system with multiplicities.
class WeightedMeasure {
public:
    explicit WeightedMeasure(RootSystem system) : system_(std::move(system)) {
        hom_dim_ = static_cast<double>(system_.dimension());
        for (double k : system_.multiplicities()) hom_dim_ += k;
    }

    const RootSystem& system() const { return system_; }
    std::size_t dimension() const { return system_.dimension(); }
    double homogeneous_dimension() const { return hom_dim_; }

private:
    RootSystem system_;
    double hom_dim_ = 0.0;
};

inline double homogeneous_dimension(const WeightedMeasure& m) { return m.homogeneous_dimension(); }

/// Product over all roots of |<x, a>|^k(a).
inline double weight_density(const WeightedMeasure& m, const Vector& x) {
    detail::require_dimension(x, m.dimension(), "weight_density");
    const auto& R = m.system();
    double w = 1.0;
    for (std::size_t i = 0; i < R.size(); ++i) w *= std::pow(std::abs(x.dot(R.root(i))), R.multiplicity(i));
    return w;
}

enum class VolumeMethod { automatic, quadrature, monte_carlo, comparable };

struct BallVolumeEstimate {
    double value = 0.0;
    double abs_error = 0.0;
    VolumeMethod method = VolumeMethod::quadrature;
};

/// Exact w-mass of [a, b] for the rank-one density 2^k |u|^{2k}.
inline double rank1_interval_mass(double k, double a, double b) {
    auto antiderivative = [k](double u) {
        return std::copysign(std::pow(2.0, k) * std::pow(std::abs(u), 2.0 * k + 1.0) / (2.0 * k + 1.0), u);
    };
    return antiderivative(b) - antiderivative(a);
}

/// Closed form of w(B(x, r)) for a rank-one system with multiplicity k.
inline double rank1_ball_volume(double k, double x, double r) { return rank1_interval_mass(k, x - r, x + r); }

inline double ball_volume_comparable(const WeightedMeasure& m, const Vector& x, double r) {
    if (!(r > 0.0)) throw DomainError("ball_volume_comparable: r must be positive");
    detail::require_dimension(x, m.dimension(), "ball_volume_comparable");
    const auto& R = m.system();
    double v = std::pow(r, static_cast<double>(m.dimension()));
    for (std::size_t i = 0; i < R.size(); ++i) v *= std::pow(std::abs(x.dot(R.root(i))) + r, R.multiplicity(i));
    return v;
}

namespace detail {

/// Integrates f over [a, b] after splitting at the given interior points.
template <class F>
double integrate_split(const F& f, double a, double b, std::vector<double> cuts, double* error_out = nullptr) {
    cuts.push_back(a);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    boost::math::quadrature::tanh_sinh<double> integrator(12);
    double total = 0.0;
    double err_total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = std::max(a, cuts[i]);
        const double hi = std::min(b, cuts[i + 1]);
        // Slivers below rounding scale carry no mass and break the tanh-sinh abscissae.
        if (!(hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)))) continue;
        double err = 0.0;
        // Mapped onto [0, 1] so abscissae near an endpoint never round onto it.
        const double width = hi - lo;
        total += width * integrator.integrate([&](double s) { return f(lo + width * s); }, 0.0, 1.0, 1e-12, &err);
        err_total += err * width;
    }
    if (error_out) *error_out = err_total;
    return total;
}

inline BallVolumeEstimate ball_volume_1d(const WeightedMeasure& m, const Vector& x, double r) {
    const double c = x(0);
    auto density = [&](double u) { return weight_density(m, make_vector({u})); };
    double err = 0.0;
    const double value = integrate_split(density, c - r, c + r, {0.0}, &err);
    return {value, std::abs(err) + 1e-13 * value, VolumeMethod::quadrature};
}

inline BallVolumeEstimate ball_volume_2d(const WeightedMeasure& m, const Vector& x, double r) {
    const auto& R = m.system();
    const double cx = x(0), cy = x(1);
    double inner_err = 0.0;
    auto inner = [&](double u) {
        const double half = std::sqrt(std::max(0.0, r * r - (u - cx) * (u - cx)));
        if (half <= 0.0) return 0.0;
        std::vector<double> cuts;
        for (const auto& a : R.roots())
            if (std::abs(a(1)) > kDedupTolerance) cuts.push_back(-a(0) * u / a(1));
        double err = 0.0;
        Vector p(2);
        const double value = integrate_split(
            [&](double v) {
                p << u, v;
                return weight_density(m, p);
            },
            cy - half, cy + half, cuts, &err);
        inner_err = std::max(inner_err, std::abs(err));
        return value;
    };
    // Outer cuts: vertical walls and the abscissas where a wall meets the circle.
    std::vector<double> cuts;
    for (const auto& a : R.roots()) {
        if (std::abs(a(1)) <= kDedupTolerance) {
            cuts.push_back(0.0);
            continue;
        }
        const double slope = -a(0) / a(1);
        // Solve (u - cx)^2 + (slope u - cy)^2 = r^2.
        const double qa = 1.0 + slope * slope;
        const double qb = -2.0 * cx - 2.0 * slope * cy;
        const double qc = cx * cx + cy * cy - r * r;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc > 0.0) {
            cuts.push_back((-qb - std::sqrt(disc)) / (2.0 * qa));
            cuts.push_back((-qb + std::sqrt(disc)) / (2.0 * qa));
        }
    }
    double outer_err = 0.0;
    const double value = integrate_split(inner, cx - r, cx + r, cuts, &outer_err);
    return {value, std::abs(outer_err) + 2.0 * r * inner_err + 1e-12 * value, VolumeMethod::quadrature};
}

inline BallVolumeEstimate ball_volume_mc(const WeightedMeasure& m, const Vector& x, double r, std::size_t points,
                                         std::uint64_t seed) {
    const auto n = static_cast<int>(m.dimension());
    // Stratify the bounding cube into cells^n boxes with an equal share of points.
    const int cells = std::max(1, static_cast<int>(std::floor(std::pow(static_cast<double>(points) / 16.0, 1.0 / n))));
    std::size_t boxes = 1;
    for (int i = 0; i < n; ++i) boxes *= static_cast<std::size_t>(cells);
    const std::size_t per_box = std::max<std::size_t>(2, points / boxes);
    const double side = 2.0 * r / cells;
    const double box_volume = std::pow(side, n);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double total = 0.0, variance = 0.0;
    std::vector<int> index(static_cast<std::size_t>(n), 0);
    Vector p(n);
    for (std::size_t b = 0; b < boxes; ++b) {
        std::size_t rest = b;
        for (int i = 0; i < n; ++i) {
            index[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(cells));
            rest /= static_cast<std::size_t>(cells);
        }
        double s = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < per_box; ++j) {
            for (int i = 0; i < n; ++i) p(i) = x(i) - r + side * (index[static_cast<std::size_t>(i)] + unit(rng));
            const double v = (p - x).squaredNorm() <= r * r ? weight_density(m, p) : 0.0;
            s += v;
            s2 += v * v;
        }
        const double mean = s / per_box;
        const double var = std::max(0.0, s2 / per_box - mean * mean) * per_box / (per_box - 1.0);
        total += box_volume * mean;
        variance += box_volume * box_volume * var / per_box;
    }
    return {total, std::sqrt(variance), VolumeMethod::monte_carlo};
}

} // namespace detail

/// w(B(x, r)): adaptive quadrature split at wall crossings for N <= 2,
/// stratified Monte Carlo with a reported standard error otherwise.
inline BallVolumeEstimate ball_volume(const WeightedMeasure& m, const Vector& x, double r,
                                      VolumeMethod method = VolumeMethod::automatic, std::size_t mc_points = 1'000'000,
                                      std::uint64_t seed = 1) {
    if (!(r > 0.0)) throw DomainError("ball_volume: r must be positive");
    detail::require_dimension(x, m.dimension(), "ball_volume");
    const std::size_t n = m.dimension();
    if (method == VolumeMethod::comparable)
        return {ball_volume_comparable(m, x, r), std::numeric_limits<double>::infinity(), VolumeMethod::comparable};
    if (method == VolumeMethod::automatic) method = n <= 2 ? VolumeMethod::quadrature : VolumeMethod::monte_carlo;
    if (method == VolumeMethod::monte_carlo) return detail::ball_volume_mc(m, x, r, mc_points, seed);
    if (n == 1) return detail::ball_volume_1d(m, x, r);
    if (n == 2) return detail::ball_volume_2d(m, x, r);
    throw ValidationError("ball_volume: quadrature is available for N <= 2 only");
}

} // namespace dunkl

#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/measure.hpp"
#include "dunkl/quadrature.hpp"
#include "dunkl/rootsystems.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace dunkl {

/// Z2^N system: coordinate i carries the root pair +-sqrt(2) e_i with multiplicity k_i.
class ProductRank1System {
public:
    explicit ProductRank1System(std::vector<double> multiplicities) : k_(std::move(multiplicities)) {
        if (k_.empty()) throw ValidationError("product system: need at least one coordinate");
        for (double k : k_)
            if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("product system: multiplicities must be positive");
    }

    /// Accepts any coordinate-product root system.
    static ProductRank1System from_roots(const RootSystem& system) {
        if (!system.is_coordinate_product()) throw ValidationError("exact kernel unsupported for this family");
        std::vector<double> ks;
        for (std::size_t i = 0; i < system.dimension(); ++i) ks.push_back(system.axis_multiplicity(i));
        return ProductRank1System(std::move(ks));
    }

    std::size_t dimension() const { return k_.size(); }
    double multiplicity(std::size_t axis) const { return k_[axis]; }
    std::span<const double> multiplicities() const { return k_; }
    double homogeneous_dimension() const {
        double n = static_cast<double>(k_.size());
        for (double k : k_) n += 2.0 * k;
        return n;
    }
    RootSystem root_system() const { return RootSystem::product_z2(k_); }

private:
    std::vector<double> k_;
};

struct SeriesPolicy {
    std::size_t max_terms = 200000;
    double term_tol = 1e-17;
    std::size_t min_terms = 40;
    /// Beyond this |xy| the large-argument expansion replaces the power series.
    double asymptotic_threshold = 40.0;
};

namespace rank1 {

/// log E_k(u, v) - (u^2 + v^2)/2 for the rank-one kernel with multiplicity k.
///
/// Non-negative products use the power series with coefficients 1/gamma_n,
/// gamma_n = gamma_{n-1} (n + 2k [n odd]). Negative products use the
/// equivalent positive-term form E = e^{uv} M(k, 2k+1, -2uv). Large |uv|
/// switches to the Kummer large-argument expansion.
inline double log_scaled_kernel(double k, double u, double v, const SeriesPolicy& policy = {}) {
    const double z = u * v;
    const double gauss = 0.5 * (u * u + v * v);
    if (std::abs(z) <= policy.asymptotic_threshold) {
        quadrature::CompensatedSum sum;
        double term = 1.0;
        sum.add(term);
        const bool positive = z >= 0.0;
        const double a = std::abs(z);
        std::size_t n = 1;
        for (; n <= policy.max_terms; ++n) {
            const double dn = static_cast<double>(n);
            if (positive)
                term *= a / (dn + ((n % 2 == 1) ? 2.0 * k : 0.0));
            else
                term *= (k + (dn - 1.0)) / (2.0 * k + dn) * (2.0 * a) / dn;
            sum.add(term);
            if (n >= policy.min_terms && dn > 2.0 * a && term < policy.term_tol * sum.value()) break;
        }
        if (n > policy.max_terms) {
            std::ostringstream os;
            os << "kernel series did not converge for |xy| = " << a;
            throw NumericError(os.str());
        }
        return std::log(sum.value()) - gauss + (positive ? 0.0 : -a);
    }

    const double a = std::abs(z);
    const double big = 2.0 * a;
    // Asymptotic sum truncated at its smallest term.
    auto tail_sum = [&](double p, double q) {
        double term = 1.0, sum = 1.0, last = 1.0;
        for (int s = 0; s < 400; ++s) {
            term *= (p + s) * (q + s) / ((s + 1.0) * big);
            if (std::abs(term) >= std::abs(last) || term == 0.0) break;
            sum += term;
            last = term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    };
    if (z > 0.0) {
        const double s = tail_sum(k, -k);
        const double diff = u - v;
        return -0.5 * diff * diff + std::lgamma(2.0 * k + 1.0) - std::lgamma(k + 1.0) - k * std::log(big) + std::log(s);
    }
    const double s = tail_sum(k + 1.0, 1.0 - k);
    const double diff = std::abs(u) - std::abs(v);
    return -0.5 * diff * diff + std::lgamma(2.0 * k + 1.0) - std::lgamma(k) - (k + 1.0) * std::log(big) + std::log(s);
}

/// log of the normalization integral of exp(-u^2/2) 2^k |u|^{2k} over the line,
/// by composite Gauss-Jacobi quadrature.
inline double log_normalization(double k) {
    const auto head = quadrature::gauss_jacobi(32, 0.0, 2.0 * k);
    const auto legendre = quadrature::gauss_legendre(32);
    quadrature::CompensatedSum half;
    // [0, 1] with the u^{2k} factor in the rule: u = (1 + s)/2.
    for (std::size_t i = 0; i < head.nodes.size(); ++i) {
        const double u = 0.5 * (1.0 + head.nodes[i]);
        half.add(head.weights[i] * std::pow(0.5, 2.0 * k + 1.0) * std::exp(-0.5 * u * u));
    }
    for (int panel = 1; panel < 40; ++panel) {
        const auto rule = quadrature::mapped(legendre, panel, panel + 1.0);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double u = rule.nodes[i];
            half.add(rule.weights[i] * std::pow(u, 2.0 * k) * std::exp(-0.5 * u * u));
        }
    }
    return std::log(2.0 * half.value()) + k * std::log(2.0);
}

} // namespace rank1

/**
 * @brief Exact heat kernel of a Z2^N product system.
 *
 * The kernel and the Dunkl kernel factor over coordinates; every evaluation is
 * carried out in log space so the Gaussian factor never underflows separately
 * from the growing series.
 */
class HeatKernelEvaluator {
public:
    explicit HeatKernelEvaluator(ProductRank1System system, SeriesPolicy policy = {})
        : system_(std::move(system)), policy_(policy) {
        for (double k : system_.multiplicities()) log_c_.push_back(rank1::log_normalization(k));
        self_check();
    }

    const ProductRank1System& system() const { return system_; }
    const SeriesPolicy& policy() const { return policy_; }
    std::size_t dimension() const { return system_.dimension(); }
    double homogeneous_dimension() const { return system_.homogeneous_dimension(); }

    double normalization_constant() const {
        double s = 0.0;
        for (double l : log_c_) s += l;
        return std::exp(s);
    }
    double axis_normalization(std::size_t axis) const { return std::exp(log_c_[axis]); }

    /// log of the rank-one heat kernel on one coordinate axis.
    double log_heat_kernel_1d(std::size_t axis, double x, double y, double t) const {
        const double k = system_.multiplicity(axis);
        const double scale = 1.0 / std::sqrt(2.0 * t);
        return -log_c_[axis] - 0.5 * (1.0 + 2.0 * k) * std::log(2.0 * t) +
               rank1::log_scaled_kernel(k, std::min(x, y) * scale, std::max(x, y) * scale, policy_);
    }

    double heat_kernel_1d(std::size_t axis, double x, double y, double t) const {
        if (!(t > 0.0)) throw DomainError("heat_kernel: t must be positive");
        return std::exp(log_heat_kernel_1d(axis, x, y, t));
    }

    double log_heat_kernel(const Vector& x, const Vector& y, double t) const {
        if (!(t > 0.0)) throw DomainError("heat_kernel: t must be positive");
        detail::require_dimension(x, dimension(), "heat_kernel");
        detail::require_dimension(y, dimension(), "heat_kernel");
        double s = 0.0;
        for (std::size_t i = 0; i < dimension(); ++i) s += log_heat_kernel_1d(i, x(static_cast<Eigen::Index>(i)), y(static_cast<Eigen::Index>(i)), t);
        return s;
    }

    double heat_kernel(const Vector& x, const Vector& y, double t) const {
        const double l = log_heat_kernel(x, y, t);
        if (l > 700.0) throw NumericError("heat_kernel: value overflows double precision");
        return std::exp(l);
    }

    double log_dunkl_kernel(const Vector& x, const Vector& y) const {
        detail::require_dimension(x, dimension(), "dunkl_kernel");
        detail::require_dimension(y, dimension(), "dunkl_kernel");
        double s = 0.0;
        for (std::size_t i = 0; i < dimension(); ++i) {
            const auto j = static_cast<Eigen::Index>(i);
            // Ordered arguments keep the result bitwise symmetric.
            const double a = std::min(x(j), y(j)), b = std::max(x(j), y(j));
            s += rank1::log_scaled_kernel(system_.multiplicity(i), a, b, policy_) + 0.5 * (a * a + b * b);
        }
        return s;
    }

    double dunkl_kernel(const Vector& x, const Vector& y) const {
        const double l = log_dunkl_kernel(x, y);
        if (l > 700.0) throw NumericError("dunkl_kernel: value overflows double precision");
        return std::exp(l);
    }

    /// Largest relative residual of T_{e_i} E(., y)(x) = y_i E(x, y) over the axes,
    /// with the derivative taken by a fourth-order central difference.
    double eigen_residual(const Vector& x, const Vector& y) const {
        double worst = 0.0;
        const double e = dunkl_kernel(x, y);
        for (std::size_t i = 0; i < dimension(); ++i) {
            const auto j = static_cast<Eigen::Index>(i);
            const double k = system_.multiplicity(i);
            const double h = 1e-3 * (1.0 + std::abs(x(j)));
            auto at = [&](double xi) {
                Vector p = x;
                p(j) = xi;
                return dunkl_kernel(p, y);
            };
            const double xi = x(j);
            const double derivative = (-at(xi + 2 * h) + 8 * at(xi + h) - 8 * at(xi - h) + at(xi - 2 * h)) / (12 * h);
            const double difference = k * (e - at(-xi)) / xi;
            worst = std::max(worst, std::abs(derivative + difference - y(j) * e) / std::abs(e));
        }
        return worst;
    }

private:
    void self_check() const {
        const auto n = static_cast<Eigen::Index>(dimension());
        const Vector x = Vector::Constant(n, 0.7);
        const Vector y = Vector::Constant(n, -0.9);
        const double r = std::max(eigen_residual(x, y), eigen_residual(-x, -1.3 * y));
        if (!(r <= 1e-6)) {
            std::ostringstream os;
            os << "kernel eigenfunction check failed, residual " << r;
            throw NumericError(os.str());
        }
    }

    ProductRank1System system_;
    SeriesPolicy policy_;
    std::vector<double> log_c_;
};

inline double dunkl_kernel(const HeatKernelEvaluator& ev, const Vector& x, const Vector& y) { return ev.dunkl_kernel(x, y); }
inline double normalization_constant(const HeatKernelEvaluator& ev) { return ev.normalization_constant(); }
inline double heat_kernel(const HeatKernelEvaluator& ev, const Vector& x, const Vector& y, double t) {
    return ev.heat_kernel(x, y, t);
}

/// Dunkl Laplacian of f at x: fourth-order central differences for the
/// Euclidean part plus the exact reflection-difference terms.
template <class F>
double apply_dunkl_laplacian(const RootSystem& system, const F& f, const Vector& x) {
    detail::require_dimension(x, system.dimension(), "apply_dunkl_laplacian");
    for (const auto& a : system.roots())
        if (std::abs(a.dot(x)) < 1e-6) throw NumericError("apply_dunkl_laplacian: point too close to a reflection hyperplane");
    const auto n = x.size();
    const double h = 1e-4 * (1.0 + x.norm());
    const double fx = f(x);
    Vector gradient(n);
    double laplacian = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto at = [&](double offset) {
            Vector p = x;
            p(i) += offset;
            return f(p);
        };
        const double p1 = at(h), m1 = at(-h), p2 = at(2 * h), m2 = at(-2 * h);
        laplacian += (-p2 + 16 * p1 - 30 * fx + 16 * m1 - m2) / (12 * h * h);
        gradient(i) = (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h);
    }
    double difference = 0.0;
    for (std::size_t r = 0; r < system.size(); ++r) {
        const auto& a = system.root(r);
        const double ax = a.dot(x);
        const double reflected = f(reflect(a, x));
        difference += system.multiplicity(r) * (gradient.dot(a) / ax - 0.5 * a.squaredNorm() * (fx - reflected) / (ax * ax));
    }
    return laplacian + difference;
}

/// Dunkl operator T_xi f(x) with a fourth-order directional difference.
template <class F>
double apply_dunkl_operator(const RootSystem& system, const F& f, const Vector& x, const Vector& direction) {
    const double h = 1e-4 * (1.0 + x.norm());
    const Vector unit = direction.normalized();
    const double derivative = direction.norm() *
                              (-f(x + 2 * h * unit) + 8 * f(x + h * unit) - 8 * f(x - h * unit) + f(x - 2 * h * unit)) / (12 * h);
    const double fx = f(x);
    double difference = 0.0;
    for (std::size_t r = 0; r < system.size(); ++r) {
        const auto& a = system.root(r);
        difference += 0.5 * system.multiplicity(r) * a.dot(direction) * (fx - f(reflect(a, x))) / a.dot(x);
    }
    return derivative + difference;
}

struct BoundParams {
    double c_upper = 0.2;
    double c_lower = 0.3;
    double C_upper = 1.0;
    double C_lower = 1.0;

    void validate() const {
        if (!(c_upper > 0.0 && c_upper < 0.25 && c_lower > 0.25))
            throw ValidationError("bound parameters must satisfy 0 < c_u < 1/4 < c_l");
        if (!(C_upper > 0.0 && C_lower > 0.0)) throw ValidationError("bound constants must be positive");
    }
};

struct BoundPair {
    double lower = 0.0;
    double upper = 0.0;
};

/// Gaussian-times-Lambda envelope of the heat kernel for a general root system.
class HeatBounds {
public:
    explicit HeatBounds(const RootSystem& system) : measure_(system), group_(build_group(system)) {}

    const WeightedMeasure& measure() const { return measure_; }
    const ReflectionGroup& group() const { return group_; }

    double ball_volume(const Vector& x, double r) const {
        const auto& R = measure_.system();
        if (R.dimension() == 1) return rank1_ball_volume(R.multiplicity(0), x(0), r);
        return dunkl::ball_volume(measure_, x, r).value;
    }

    BoundPair evaluate(const Vector& x, const Vector& y, double t, const BoundParams& params) const {
        params.validate();
        if (!(t > 0.0)) throw DomainError("heat_bound: t must be positive");
        const double volume = ball_volume(x, std::sqrt(t));
        const double d = orbit_distance(group_, x, y);
        const double lam = lambda(measure_.system(), group_, x, y, t, LambdaRange::full);
        const double base = lam / volume;
        return {params.C_lower * base * std::exp(-params.c_lower * d * d / t),
                params.C_upper * base * std::exp(-params.c_upper * d * d / t)};
    }

private:
    WeightedMeasure measure_;
    ReflectionGroup group_;
};

inline BoundPair heat_bound(const HeatBounds& bounds, const Vector& x, const Vector& y, double t, const BoundParams& params) {
    return bounds.evaluate(x, y, t, params);
}

/// Tightest constants making lower <= h <= upper on a sample: C_l = min h/L, C_u = max h/U
/// where L and U are the unit-constant bounds.
struct FittedBoundConstants {
    double C_lower = std::numeric_limits<double>::infinity();
    double C_upper = 0.0;
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    std::size_t samples = 0;

    void add(double h, const BoundPair& unit) {
        const double rl = h / unit.lower;
        const double ru = h / unit.upper;
        C_lower = std::min(C_lower, rl);
        C_upper = std::max(C_upper, ru);
        min_ratio = std::min({min_ratio, rl, ru});
        max_ratio = std::max({max_ratio, rl, ru});
        ++samples;
    }
};

} // namespace dunkl

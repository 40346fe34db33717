#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/rootsystems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dunkl {

/// Non-negative potential V, optionally capped at a truncation level min(V, n).
class Potential {
public:
    enum class Kind { constant, ball_indicator, radial_power, table };

    static Potential constant(double value) {
        if (!(value >= 0.0) || !std::isfinite(value)) throw ValidationError("potential: constant must be finite and >= 0");
        Potential p(Kind::constant);
        p.height_ = value;
        return p;
    }

    static Potential ball_indicator(Vector center, double radius, double height = 1.0) {
        if (!(radius > 0.0)) throw ValidationError("potential: ball radius must be positive");
        if (!(height >= 0.0) || !std::isfinite(height)) throw ValidationError("potential: height must be finite and >= 0");
        Potential p(Kind::ball_indicator);
        p.center_ = std::move(center);
        p.radius_ = radius;
        p.height_ = height;
        return p;
    }

    /// scale * |x|^{-exponent} on the ball |x| <= cutoff, zero outside.
    static Potential radial_power(double exponent, double cutoff, double scale = 1.0) {
        if (!(exponent >= 0.0)) throw ValidationError("potential: radial exponent must be >= 0");
        if (!(cutoff > 0.0)) throw ValidationError("potential: radial cutoff must be positive");
        if (!(scale >= 0.0)) throw ValidationError("potential: radial scale must be >= 0");
        Potential p(Kind::radial_power);
        p.exponent_ = exponent;
        p.radius_ = cutoff;
        p.height_ = scale;
        return p;
    }

    /// Piecewise-linear interpolation of (nodes, values) in one variable, zero outside the nodes.
    static Potential table(std::vector<double> nodes, std::vector<double> values) {
        if (nodes.size() < 2 || nodes.size() != values.size())
            throw ValidationError("potential: table needs matching node and value lists of length >= 2");
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
            if (!(nodes[i] < nodes[i + 1])) throw ValidationError("potential: table nodes must be strictly increasing");
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("potential: table values must be finite and >= 0");
        Potential p(Kind::table);
        p.nodes_ = std::move(nodes);
        p.values_ = std::move(values);
        return p;
    }

    Kind kind() const { return kind_; }

    Potential truncated(double level) const {
        if (!(level > 0.0)) throw ValidationError("potential: truncation level must be positive");
        Potential p = *this;
        p.cap_ = std::min(cap_, level);
        return p;
    }
    double truncation_level() const { return cap_; }

    double operator()(const Vector& x) const { return std::min(raw(x), cap_); }
    double operator()(double x) const { return (*this)(make_vector({x})); }

    double sup() const { return std::min(raw_sup(), cap_); }
    bool is_bounded() const { return std::isfinite(sup()); }
    bool is_zero() const { return sup() == 0.0; }
    std::optional<double> constant_value() const {
        if (kind_ == Kind::constant) return std::min(height_, cap_);
        return std::nullopt;
    }

    /// Radius of a centered ball containing the support; empty for constants.
    std::optional<double> support_radius() const {
        switch (kind_) {
            case Kind::constant:
                if (height_ == 0.0) return 0.0;
                return std::nullopt;
            case Kind::ball_indicator: return center_.norm() + radius_;
            case Kind::radial_power: return radius_;
            case Kind::table: return std::max(std::abs(nodes_.front()), std::abs(nodes_.back()));
        }
        return std::nullopt;
    }

    /// Coordinates along a single axis where V jumps or has kinks.
    std::vector<double> breakpoints() const {
        switch (kind_) {
            case Kind::constant: return {};
            case Kind::ball_indicator: {
                const double c = center_.size() > 0 ? center_(0) : 0.0;
                return {c - radius_, c + radius_};
            }
            case Kind::radial_power: return {-radius_, radius_};
            case Kind::table: return nodes_;
        }
        return {};
    }

    /// Interval in one variable outside which V vanishes.
    std::pair<double, double> support_1d() const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        switch (kind_) {
            case Kind::constant: return height_ == 0.0 ? std::pair{0.0, 0.0} : std::pair{-inf, inf};
            case Kind::ball_indicator: {
                const double c = center_.size() > 0 ? center_(0) : 0.0;
                return {c - radius_, c + radius_};
            }
            case Kind::radial_power: return {-radius_, radius_};
            case Kind::table: return {nodes_.front(), nodes_.back()};
        }
        return {-inf, inf};
    }

    /// Local integrability against a measure of homogeneous dimension hom_dim.
    void check_integrable(double hom_dim) const {
        if (kind_ == Kind::radial_power && std::isinf(cap_) && !(exponent_ < hom_dim))
            throw ValidationError("potential: radial exponent " + std::to_string(exponent_) +
                                  " is not locally integrable (needs exponent < homogeneous dimension " +
                                  std::to_string(hom_dim) + ")");
    }

    void check_dimension(std::size_t n) const {
        if (kind_ == Kind::ball_indicator && static_cast<std::size_t>(center_.size()) != n)
            throw ValidationError("potential: ball center dimension does not match the system");
        if (kind_ == Kind::table && n != 1) throw ValidationError("potential: table potentials are one-dimensional");
    }

private:
    explicit Potential(Kind kind) : kind_(kind) {}

    double raw(const Vector& x) const {
        switch (kind_) {
            case Kind::constant: return height_;
            case Kind::ball_indicator: {
                if (x.size() != center_.size()) throw ValidationError("potential: point dimension mismatch");
                return (x - center_).squaredNorm() <= radius_ * radius_ ? height_ : 0.0;
            }
            case Kind::radial_power: {
                const double r = x.norm();
                if (r > radius_) return 0.0;
                if (exponent_ == 0.0) return height_;
                if (r == 0.0) return std::numeric_limits<double>::infinity();
                return height_ * std::pow(r, -exponent_);
            }
            case Kind::table: {
                const double u = x(0);
                if (u < nodes_.front() || u > nodes_.back()) return 0.0;
                const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), u);
                if (it == nodes_.end()) return values_.back();
                const std::size_t j = static_cast<std::size_t>(it - nodes_.begin());
                const double s = (u - nodes_[j - 1]) / (nodes_[j] - nodes_[j - 1]);
                return (1.0 - s) * values_[j - 1] + s * values_[j];
            }
        }
        return 0.0;
    }

    double raw_sup() const {
        switch (kind_) {
            case Kind::constant:
            case Kind::ball_indicator: return height_;
            case Kind::radial_power:
                return exponent_ == 0.0 || height_ == 0.0 ? height_ : std::numeric_limits<double>::infinity();
            case Kind::table: return *std::max_element(values_.begin(), values_.end());
        }
        return 0.0;
    }

    Kind kind_;
    Vector center_;
    double radius_ = 0.0;
    double height_ = 0.0;
    double exponent_ = 0.0;
    std::vector<double> nodes_, values_;
    double cap_ = std::numeric_limits<double>::infinity();
};

} // namespace dunkl

#pragma once

#include "dunkl/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace dunkl::quadrature {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^a (1+x)^b, via Golub-Welsch.
inline Rule gauss_jacobi(int n, double a, double b) {
    if (n < 1) throw ValidationError("gauss_jacobi: need at least one node");
    if (!(a > -1.0) || !(b > -1.0)) throw ValidationError("gauss_jacobi: exponents must exceed -1");
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(n > 1 ? n - 1 : 1);
    const double ab = a + b;
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + ab;
        diag(k) = (k == 0) ? (b - a) / (ab + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    }
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + ab;
        double beta = 0.0;
        if (k == 1) {
            beta = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
        } else {
            beta = 4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
        }
        sub(k - 1) = std::sqrt(beta);
    }
    const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                                std::lgamma(ab + 2.0));

    Rule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    if (n == 1) {
        rule.nodes[0] = diag(0);
        rule.weights[0] = mu0;
        return rule;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw NumericError("gauss_jacobi: eigen solver failed");
    for (int i = 0; i < n; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
    }
    return rule;
}

inline Rule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

/// Rule mapped from [-1, 1] onto [lo, hi] (Legendre weight).
inline Rule mapped(const Rule& reference, double lo, double hi) {
    Rule out;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t i = 0; i < reference.nodes.size(); ++i) {
        out.nodes.push_back(mid + half * reference.nodes[i]);
        out.weights.push_back(half * reference.weights[i]);
    }
    return out;
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace dunkl::quadrature

#pragma once

#include "dunkl/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace dunkl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Vector make_vector(std::initializer_list<double> coords) {
    Vector v(static_cast<Eigen::Index>(coords.size()));
    Eigen::Index i = 0;
    for (double c : coords) v(i++) = c;
    return v;
}

/// Max-norm tolerance for identifying group elements and orbit points.
inline constexpr double kDedupTolerance = 1e-9;
/// Closed-chamber slack on the sign test.
inline constexpr double kChamberTolerance = 1e-12;
inline constexpr std::size_t kDefaultGroupCap = 1024;
inline constexpr double kNaiveLambdaBudget = 1e7;

namespace detail {

inline bool nearly_equal(const Vector& a, const Vector& b, double tol = kDedupTolerance) {
    return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() <= tol;
}

inline bool nearly_equal(const Matrix& a, const Matrix& b, double tol = kDedupTolerance) {
    return (a - b).cwiseAbs().maxCoeff() <= tol;
}

inline void require_dimension(const Vector& v, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(v.size()) != n) {
        std::ostringstream os;
        os << what << ": expected dimension " << n << ", got " << v.size();
        throw ValidationError(os.str());
    }
}

} // namespace detail

/// Reflection through the hyperplane orthogonal to `root`.
inline Vector reflect(const Vector& root, const Vector& x) {
    if (root.size() != x.size()) throw ValidationError("reflect: dimension mismatch");
    const double norm2 = root.squaredNorm();
    if (std::abs(norm2 - 2.0) > 1e-9) throw ValidationError("reflect: root is not normalized to |a|^2 = 2");
    return x - (2.0 * x.dot(root) / norm2) * root;
}

/**
 * @brief A normalized root system together with a multiplicity function.
 *
 * Holds the full set R (closed under negation), each root with squared norm 2.
 * Construction validates everything that can be checked without the group;
 * invariance of the multiplicities under the group is checked by build_group().
 */
class RootSystem {
public:
    RootSystem(std::vector<Vector> roots, std::vector<double> multiplicities)
        : roots_(std::move(roots)), multiplicities_(std::move(multiplicities)) {
        validate();
    }

    /// Roots +-sqrt(2) e_i with multiplicity k_i on coordinate i.
    static RootSystem product_z2(std::span<const double> ks) {
        if (ks.empty()) throw ValidationError("product_z2: need at least one multiplicity");
        const auto n = static_cast<Eigen::Index>(ks.size());
        std::vector<Vector> roots;
        std::vector<double> mult;
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector e = Vector::Zero(n);
            e(i) = std::numbers::sqrt2;
            roots.push_back(e);
            roots.push_back(-e);
            mult.push_back(ks[static_cast<std::size_t>(i)]);
            mult.push_back(ks[static_cast<std::size_t>(i)]);
        }
        return RootSystem(std::move(roots), std::move(mult));
    }

    /// Dihedral system with 2m roots at angles pi*j/m. For even m the two root
    /// orbits (even and odd j) carry k_even and k_odd; for odd m they must match.
    static RootSystem dihedral(int m, double k_even, double k_odd) {
        if (m < 1) throw ValidationError("dihedral: m must be >= 1");
        if (m % 2 == 1 && k_even != k_odd)
            throw ValidationError("dihedral: odd m has a single root orbit, multiplicities must agree");
        std::vector<Vector> roots;
        std::vector<double> mult;
        for (int j = 0; j < 2 * m; ++j) {
            const double angle = std::numbers::pi * j / m;
            roots.push_back(make_vector({std::numbers::sqrt2 * std::cos(angle), std::numbers::sqrt2 * std::sin(angle)}));
            mult.push_back(j % 2 == 0 ? k_even : k_odd);
        }
        return RootSystem(std::move(roots), std::move(mult));
    }

    std::size_t dimension() const { return static_cast<std::size_t>(roots_.front().size()); }
    std::size_t size() const { return roots_.size(); }
    const Vector& root(std::size_t i) const { return roots_[i]; }
    std::span<const Vector> roots() const { return roots_; }
    double multiplicity(std::size_t i) const { return multiplicities_[i]; }
    std::span<const double> multiplicities() const { return multiplicities_; }

    /// Index of the root equal to v within the dedup tolerance.
    std::optional<std::size_t> find_root(const Vector& v) const {
        for (std::size_t i = 0; i < roots_.size(); ++i)
            if (detail::nearly_equal(roots_[i], v)) return i;
        return std::nullopt;
    }

    /// Reflection matrix I - a a^T of root i (valid because |a|^2 = 2).
    Matrix reflection_matrix(std::size_t i) const {
        const auto n = static_cast<Eigen::Index>(dimension());
        return Matrix::Identity(n, n) - roots_[i] * roots_[i].transpose();
    }

    /// True when R is a product of rank-one systems along the coordinate axes.
    bool is_coordinate_product() const {
        const auto n = static_cast<Eigen::Index>(dimension());
        if (roots_.size() != 2 * static_cast<std::size_t>(n)) return false;
        for (const auto& r : roots_) {
            Eigen::Index nonzero = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (std::abs(r(i)) > kDedupTolerance) ++nonzero;
            if (nonzero != 1) return false;
        }
        return true;
    }

    /// Multiplicity attached to coordinate axis i of a coordinate product system.
    double axis_multiplicity(std::size_t axis) const {
        for (std::size_t i = 0; i < roots_.size(); ++i)
            if (std::abs(roots_[i](static_cast<Eigen::Index>(axis))) > kDedupTolerance) return multiplicities_[i];
        throw ValidationError("axis_multiplicity: no root along the requested axis");
    }

private:
    void validate() const {
        if (roots_.empty()) throw ValidationError("root system: empty root set");
        if (roots_.size() != multiplicities_.size())
            throw ValidationError("root system: one multiplicity per root is required");
        const auto n = roots_.front().size();
        if (n < 1) throw ValidationError("root system: zero-dimensional roots");
        for (std::size_t i = 0; i < roots_.size(); ++i) {
            const auto& a = roots_[i];
            if (a.size() != n) throw ValidationError("root system: roots have different dimensions");
            if (std::abs(a.squaredNorm() - 2.0) > 1e-12) {
                std::ostringstream os;
                os << "root system: root " << i << " has squared norm " << a.squaredNorm() << ", expected 2";
                throw ValidationError(os.str());
            }
            if (!(multiplicities_[i] > 0.0) || !std::isfinite(multiplicities_[i]))
                throw ValidationError("root system: multiplicities must be positive");
        }
        for (std::size_t i = 0; i < roots_.size(); ++i) {
            const auto& a = roots_[i];
            if (!find_root(-a)) throw ValidationError("root system: not closed under negation");
            for (std::size_t j = 0; j < roots_.size(); ++j) {
                if (i == j) continue;
                const auto& b = roots_[j];
                const double cosine = a.dot(b) / 2.0;
                if (std::abs(std::abs(cosine) - 1.0) < 1e-9 && !detail::nearly_equal(a, -b))
                    throw ValidationError("root system: parallel roots other than +-a");
                if (detail::nearly_equal(a, b)) throw ValidationError("root system: duplicate root");
            }
            for (const auto& b : roots_)
                if (!find_root(reflect(a, b))) throw ValidationError("root system: not invariant under its reflections");
        }
    }

    std::vector<Vector> roots_;
    std::vector<double> multiplicities_;
};

struct GroupElement {
    Matrix matrix;
    /// Root indices whose reflections compose to `matrix`, rightmost applied first.
    std::vector<std::size_t> word;
};

class ReflectionGroup {
public:
    explicit ReflectionGroup(std::vector<GroupElement> elements) : elements_(std::move(elements)) {}

    std::size_t order() const { return elements_.size(); }
    std::span<const GroupElement> elements() const { return elements_; }
    const GroupElement& operator[](std::size_t i) const { return elements_[i]; }

    std::optional<std::size_t> find(const Matrix& m) const {
        for (std::size_t i = 0; i < elements_.size(); ++i)
            if (detail::nearly_equal(elements_[i].matrix, m)) return i;
        return std::nullopt;
    }

private:
    std::vector<GroupElement> elements_;
};

namespace detail {

inline bool lexicographic_less(const Matrix& a, const Matrix& b) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const auto qa = std::llround(a(i, j) / kDedupTolerance);
            const auto qb = std::llround(b(i, j) / kDedupTolerance);
            if (qa != qb) return qa < qb;
        }
    return false;
}

} // namespace detail

/// Closure of the root reflections under composition, breadth-first so each
/// element keeps a shortest word. Elements are returned in lexicographic order
/// of their matrix entries.
inline ReflectionGroup build_group(const RootSystem& system, std::size_t cap = kDefaultGroupCap) {
    const auto n = static_cast<Eigen::Index>(system.dimension());
    std::vector<Matrix> generators;
    for (std::size_t i = 0; i < system.size(); ++i) generators.push_back(system.reflection_matrix(i));

    std::vector<GroupElement> found{{Matrix::Identity(n, n), {}}};
    std::deque<std::size_t> frontier{0};
    while (!frontier.empty()) {
        const std::size_t current = frontier.front();
        frontier.pop_front();
        for (std::size_t g = 0; g < generators.size(); ++g) {
            Matrix product = generators[g] * found[current].matrix;
            const bool known = std::any_of(found.begin(), found.end(),
                                           [&](const GroupElement& e) { return detail::nearly_equal(e.matrix, product); });
            if (known) continue;
            if (found.size() >= cap) throw ValidationError("group too large");
            std::vector<std::size_t> word{g};
            word.insert(word.end(), found[current].word.begin(), found[current].word.end());
            found.push_back({std::move(product), std::move(word)});
            frontier.push_back(found.size() - 1);
        }
    }

    for (const auto& e : found) {
        const Matrix gram = e.matrix.transpose() * e.matrix;
        if ((gram - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
            throw ValidationError("build_group: generated element is not orthogonal");
        for (std::size_t i = 0; i < system.size(); ++i) {
            const auto image = system.find_root(e.matrix * system.root(i));
            if (!image) throw ValidationError("build_group: group does not preserve the root set");
            if (std::abs(system.multiplicity(*image) - system.multiplicity(i)) > 1e-12)
                throw ValidationError("multiplicity is not constant on root orbits");
        }
    }

    std::sort(found.begin(), found.end(),
              [](const GroupElement& a, const GroupElement& b) { return detail::lexicographic_less(a.matrix, b.matrix); });
    return ReflectionGroup(std::move(found));
}

/// Distinct images of x under the group, in group-element order.
inline std::vector<Vector> orbit(const ReflectionGroup& group, const Vector& x) {
    std::vector<Vector> points;
    for (const auto& e : group.elements()) {
        Vector image = e.matrix * x;
        const bool seen = std::any_of(points.begin(), points.end(),
                                      [&](const Vector& p) { return detail::nearly_equal(p, image); });
        if (!seen) points.push_back(std::move(image));
    }
    return points;
}

inline double orbit_distance(const ReflectionGroup& group, const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw ValidationError("orbit_distance: dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : group.elements()) best = std::min(best, (x - e.matrix * y).norm());
    return best;
}

/// Sign test for a common closed Weyl chamber.
inline bool chamber_equivalent(const RootSystem& system, const Vector& x, const Vector& y) {
    detail::require_dimension(x, system.dimension(), "chamber_equivalent");
    detail::require_dimension(y, system.dimension(), "chamber_equivalent");
    const double slack = kChamberTolerance * (1.0 + x.norm() * y.norm());
    for (const auto& a : system.roots())
        if (x.dot(a) * y.dot(a) < -slack) return false;
    return true;
}

/// Sign test cross-checked against the distance characterization
/// d(x, y) == |x - y|. Disagreement raises ConsistencyError.
inline bool chamber_equivalent_checked(const RootSystem& system, const ReflectionGroup& group, const Vector& x,
                                       const Vector& y) {
    const bool by_sign = chamber_equivalent(system, x, y);
    const double euclid = (x - y).norm();
    const bool by_distance = std::abs(orbit_distance(group, x, y) - euclid) <= 1e-9 * (1.0 + euclid);
    if (by_sign != by_distance) {
        std::ostringstream os;
        os << "chamber test disagreement: sign test " << by_sign << ", distance test " << by_distance;
        throw ConsistencyError(os.str());
    }
    return by_sign;
}

/**
 * @brief Orbit of a point with the reflection action tabulated.
 *
 * next(v, a) is the index of the reflection of point v in root a.
 */
class OrbitGraph {
public:
    OrbitGraph(const RootSystem& system, const ReflectionGroup& group, const Vector& start)
        : points_(orbit(group, start)), roots_(system.size()) {
        next_.resize(points_.size() * roots_);
        for (std::size_t v = 0; v < points_.size(); ++v)
            for (std::size_t a = 0; a < roots_; ++a) next_[v * roots_ + a] = index_of(reflect(system.root(a), points_[v]));
        start_ = index_of(start);
    }

    std::size_t size() const { return points_.size(); }
    std::size_t start() const { return start_; }
    const Vector& point(std::size_t v) const { return points_[v]; }
    std::size_t next(std::size_t v, std::size_t a) const { return next_[v * roots_ + a]; }
    std::size_t root_count() const { return roots_; }

private:
    std::size_t index_of(const Vector& p) const {
        for (std::size_t i = 0; i < points_.size(); ++i)
            if (detail::nearly_equal(points_[i], p)) return i;
        throw ConsistencyError("orbit graph: reflected point is not in the orbit");
    }

    std::vector<Vector> points_;
    std::size_t roots_;
    std::vector<std::size_t> next_;
    std::size_t start_ = 0;
};

/// Minimal number of root reflections moving y into the closed chamber of x.
inline std::size_t reflection_count(const RootSystem& system, const ReflectionGroup& group, const Vector& x,
                                    const Vector& y) {
    detail::require_dimension(x, system.dimension(), "reflection_count");
    detail::require_dimension(y, system.dimension(), "reflection_count");
    const OrbitGraph graph(system, group, y);
    std::vector<std::size_t> depth(graph.size(), std::numeric_limits<std::size_t>::max());
    std::deque<std::size_t> queue{graph.start()};
    depth[graph.start()] = 0;
    while (!queue.empty()) {
        const auto v = queue.front();
        queue.pop_front();
        if (chamber_equivalent(system, x, graph.point(v))) return depth[v];
        for (std::size_t a = 0; a < graph.root_count(); ++a) {
            const auto w = graph.next(v, a);
            if (depth[w] == std::numeric_limits<std::size_t>::max()) {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            }
        }
    }
    throw ConsistencyError("reflection_count: no orbit point shares a chamber with x");
}

/// A start point and a sequence of roots, with the successive reflected states.
class OrbitWalk {
public:
    OrbitWalk(const RootSystem& system, Vector start, std::vector<std::size_t> roots) : roots_(std::move(roots)) {
        detail::require_dimension(start, system.dimension(), "OrbitWalk");
        states_.push_back(std::move(start));
        for (auto a : roots_) {
            if (a >= system.size()) throw ValidationError("OrbitWalk: root index out of range");
            states_.push_back(reflect(system.root(a), states_.back()));
        }
    }

    std::size_t length() const { return roots_.size(); }
    std::span<const std::size_t> roots() const { return roots_; }
    std::span<const Vector> states() const { return states_; }
    const Vector& start() const { return states_.front(); }
    const Vector& end() const { return states_.back(); }

private:
    std::vector<std::size_t> roots_;
    std::vector<Vector> states_;
};

inline double path_factor(const Vector& x, const Vector& state, double sqrt_t) {
    const double base = 1.0 + (x - state).norm() / sqrt_t;
    return 1.0 / (base * base);
}

/// Product of (1 + |x - s|/sqrt(t))^-2 over every state except the last.
inline double rho(const OrbitWalk& walk, const Vector& x, double t) {
    if (!(t > 0.0)) throw DomainError("rho: t must be positive");
    const double sqrt_t = std::sqrt(t);
    double product = 1.0;
    const auto states = walk.states();
    for (std::size_t i = 0; i + 1 < states.size(); ++i) product *= path_factor(x, states[i], sqrt_t);
    return product;
}

enum class LambdaRange { reduced, full };
enum class LambdaMethod { naive, dp };

inline std::size_t lambda_max_length(const ReflectionGroup& group, LambdaRange range) {
    return range == LambdaRange::full ? 2 * group.order() : group.order();
}

namespace detail {

inline double lambda_naive(const RootSystem& system, const Vector& x, const Vector& y, double t, std::size_t max_len) {
    const std::size_t roots = system.size();
    if (std::pow(static_cast<double>(roots), static_cast<double>(max_len)) > kNaiveLambdaBudget)
        throw BudgetError("lambda: naive enumeration exceeds the budget of 1e7 sequences");
    const double sqrt_t = std::sqrt(t);
    std::vector<double> by_length(max_len + 1, 0.0);

    // Depth-first in lexicographic root order; restricted to one length this is
    // the lexicographic order over sequences.
    std::vector<Vector> states{y};
    std::vector<double> weights{1.0};
    std::vector<std::size_t> choice;
    auto visit_leaf = [&] {
        if (chamber_equivalent(system, x, states.back())) by_length[choice.size()] += weights.back();
    };
    visit_leaf();
    while (true) {
        if (choice.size() < max_len) {
            choice.push_back(0);
        } else {
            while (!choice.empty() && choice.back() + 1 == roots) {
                choice.pop_back();
                states.pop_back();
                weights.pop_back();
            }
            if (choice.empty()) break;
            ++choice.back();
            states.pop_back();
            weights.pop_back();
        }
        const Vector& prev = states.back();
        weights.push_back(weights.back() * path_factor(x, prev, sqrt_t));
        states.push_back(reflect(system.root(choice.back()), prev));
        visit_leaf();
    }
    double total = 0.0;
    for (double s : by_length) total += s;
    return total;
}

inline double lambda_dp(const RootSystem& system, const ReflectionGroup& group, const Vector& x, const Vector& y,
                        double t, std::size_t max_len) {
    const OrbitGraph graph(system, group, y);
    const double sqrt_t = std::sqrt(t);
    std::vector<double> factor(graph.size());
    std::vector<char> admissible(graph.size());
    for (std::size_t v = 0; v < graph.size(); ++v) {
        factor[v] = path_factor(x, graph.point(v), sqrt_t);
        admissible[v] = chamber_equivalent(system, x, graph.point(v)) ? 1 : 0;
    }
    std::vector<double> mass(graph.size(), 0.0), next(graph.size());
    mass[graph.start()] = 1.0;
    double total = 0.0;
    for (std::size_t m = 0; m <= max_len; ++m) {
        double level = 0.0;
        for (std::size_t v = 0; v < graph.size(); ++v)
            if (admissible[v]) level += mass[v];
        total += level;
        if (m == max_len) break;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t v = 0; v < graph.size(); ++v) {
            if (mass[v] == 0.0) continue;
            const double carried = mass[v] * factor[v];
            for (std::size_t a = 0; a < graph.root_count(); ++a) next[graph.next(v, a)] += carried;
        }
        mass.swap(next);
    }
    return total;
}

} // namespace detail

/// Sum of rho over admissible root sequences of length at most max_len,
/// counted with multiplicity.
inline double lambda(const RootSystem& system, const ReflectionGroup& group, const Vector& x, const Vector& y, double t,
                     std::size_t max_len, LambdaMethod method = LambdaMethod::dp) {
    if (!(t > 0.0)) throw DomainError("lambda: t must be positive");
    detail::require_dimension(x, system.dimension(), "lambda");
    detail::require_dimension(y, system.dimension(), "lambda");
    return method == LambdaMethod::naive ? detail::lambda_naive(system, x, y, t, max_len)
                                         : detail::lambda_dp(system, group, x, y, t, max_len);
}

inline double lambda(const RootSystem& system, const ReflectionGroup& group, const Vector& x, const Vector& y, double t,
                     LambdaRange range = LambdaRange::full, LambdaMethod method = LambdaMethod::dp) {
    return lambda(system, group, x, y, t, lambda_max_length(group, range), method);
}

} // namespace dunkl

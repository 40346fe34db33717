#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/grid.hpp"
#include "dunkl/heatkernel.hpp"
#include "dunkl/parallel.hpp"
#include "dunkl/potential.hpp"
#include "dunkl/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace dunkl {

using GridPtr = std::shared_ptr<const SpaceGrid>;

/// Dense kernel values K(node_i, node_j); quadrature weights are not folded in.
struct KernelMatrix {
    GridPtr grid;
    Matrix values;
    double time = 0.0;

    double operator()(std::size_t i, std::size_t j) const {
        return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    Eigen::Index size() const { return values.rows(); }
};

namespace detail {

inline constexpr Eigen::Index kProductBlock = 256;

/// A * B with columns of B processed in fixed blocks, so the bits of the
/// result do not depend on the worker count.
inline Matrix blocked_product(const Matrix& a, const Matrix& b, unsigned threads) {
    Matrix out(a.rows(), b.cols());
    const Eigen::Index blocks = (b.cols() + kProductBlock - 1) / kProductBlock;
    parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t blk) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(blk) * kProductBlock;
        const Eigen::Index w = std::min(kProductBlock, b.cols() - c0);
        out.middleCols(c0, w).noalias() = a * b.middleCols(c0, w);
    });
    return out;
}

inline Eigen::VectorXd weight_vector(const SpaceGrid& grid) {
    const auto w = grid.weights();
    return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

inline Matrix axis_heat_matrix(const HeatKernelEvaluator& ev, std::size_t axis, const AxisGrid& g, double t,
                               unsigned threads) {
    const auto n = static_cast<Eigen::Index>(g.nodes.size());
    Matrix h(n, n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        for (std::size_t j = 0; j <= i; ++j)
            h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                ev.heat_kernel_1d(axis, g.nodes[i], g.nodes[j], t);
    });
    h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
    return h;
}

} // namespace detail

struct HeatMatrixOptions {
    double leak_tol = 1e-6;
    bool check_leak = true;
    unsigned threads = 1;
};

/// Distance from the box edge inside which a node counts as interior for the leakage check.
inline double interior_margin(double t) { return 8.0 * std::sqrt(t); }

/// Row masses sum_j H_ij w_j at the interior nodes must lie within leak_tol of 1.
inline void check_row_mass(const KernelMatrix& h, double leak_tol) {
    const SpaceGrid& grid = *h.grid;
    const double limit = grid.radius() - interior_margin(h.time);
    const auto interior = grid.window(limit);
    const Eigen::VectorXd w = detail::weight_vector(grid);
    const double suggested = 2.0 * interior_margin(h.time) + grid.radius();
    if (interior.empty()) {
        std::ostringstream msg;
        msg << "domain too small: no interior nodes at t=" << h.time << "; suggested radius X >= " << suggested;
        throw DomainError(msg.str());
    }
    for (std::size_t i : interior) {
        const double mass = h.values.row(static_cast<Eigen::Index>(i)).dot(w);
        if (std::abs(mass - 1.0) > leak_tol) {
            std::ostringstream msg;
            msg.precision(10);
            // Leakage only loses mass; excess mass, or a defect deep inside the box, is a resolution failure.
            if (mass > 1.0 || grid.max_abs_coordinate(i) <= limit - interior_margin(h.time)) {
                msg << "grid too coarse: row mass " << mass << " at node " << grid.node(i).transpose()
                    << " for heat step t=" << h.time << "; increase the node count";
                throw NumericError(msg.str());
            }
            msg << "domain too small: row mass " << mass << " at node " << grid.node(i).transpose() << " (t=" << h.time
                << "); suggested radius X >= " << suggested;
            throw DomainError(msg.str());
        }
    }
}

/// H_ij = h_t(node_i, node_j). 2-d grids use the tensor factorization of h_t.
inline KernelMatrix heat_matrix(GridPtr grid, const HeatKernelEvaluator& ev, double t, const HeatMatrixOptions& opt = {}) {
    if (!(t > 0.0)) throw DomainError("heat_matrix: t must be positive");
    if (grid->dimension() != ev.dimension()) throw ValidationError("heat_matrix: grid and system dimensions differ");
    KernelMatrix out{grid, {}, t};
    if (grid->dimension() == 1) {
        out.values = detail::axis_heat_matrix(ev, 0, grid->axis(0), t, opt.threads);
    } else {
        const Matrix a = detail::axis_heat_matrix(ev, 0, grid->axis(0), t, opt.threads);
        const Matrix b = detail::axis_heat_matrix(ev, 1, grid->axis(1), t, opt.threads);
        out.values.resize(a.rows() * b.rows(), a.cols() * b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                out.values.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    if (!out.values.allFinite()) throw NumericError("heat_matrix: non-finite kernel values");
    if (opt.check_leak) check_row_mass(out, opt.leak_tol);
    return out;
}

/// Weighted composition (A o B)(x, y) = sum_z A(x, z) B(z, y) w(z).
inline KernelMatrix compose(const KernelMatrix& a, const KernelMatrix& b, unsigned threads = 1) {
    if (a.grid != b.grid) throw ValidationError("compose: kernels live on different grids");
    const Eigen::VectorXd w = detail::weight_vector(*a.grid);
    const Matrix aw = a.values * w.asDiagonal();
    return {a.grid, detail::blocked_product(aw, b.values, threads), a.time + b.time};
}

/// Relative sup distance max|A - B| / max|B| over nodes with all coordinates in [-limit, limit].
inline double relative_sup_distance(const Matrix& a, const Matrix& b, const SpaceGrid& grid, double limit) {
    const auto idx = grid.window(limit);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i : idx)
        for (std::size_t j : idx) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            diff = std::max(diff, std::abs(a(ii, jj) - b(ii, jj)));
            scale = std::max(scale, std::abs(b(ii, jj)));
        }
    return scale > 0.0 ? diff / scale : diff;
}

enum class Splitting { strang, left };

struct TrotterOptions {
    Splitting splitting = Splitting::strang;
    double leak_tol = 1e-6;
    unsigned threads = 1;
};

namespace detail {

inline Eigen::VectorXd potential_at_nodes(const SpaceGrid& grid, const Potential& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(grid.node(i));
    if (!out.allFinite()) throw NumericError("potential is infinite at a grid node; truncate it first");
    return out;
}

inline Matrix matrix_power(Matrix m, std::size_t n, unsigned threads) {
    Matrix result;
    bool have = false;
    while (n > 0) {
        if (n & 1u) {
            result = have ? blocked_product(result, m, threads) : m;
            have = true;
        }
        n >>= 1u;
        if (n > 0) m = blocked_product(m, m, threads);
    }
    return result;
}

} // namespace detail

/**
 * @brief Discrete Trotter kernel for (H_{t/n} e^{-tV/n})^n, D = e^{-tV/n}.
 *
 * Strang: K = W^{-1/2} M^n W^{-1/2} with M = (D W)^{1/2} H (D W)^{1/2}.
 * Left:   K = H (D W H)^{n-1} D = W^{-1/2} B^n W^{-1/2} with B = W^{1/2} H D W^{1/2}.
 */
inline KernelMatrix trotter_kernel(GridPtr grid, const HeatKernelEvaluator& ev, const Potential& v, double t,
                                   std::size_t n, const TrotterOptions& opt = {}) {
    if (!(t > 0.0)) throw DomainError("trotter_kernel: t must be positive");
    if (n < 1) throw ValidationError("trotter_kernel: n must be >= 1");
    const double tau = t / static_cast<double>(n);
    const KernelMatrix h = heat_matrix(grid, ev, tau, {opt.leak_tol, true, opt.threads});
    const Eigen::VectorXd w = detail::weight_vector(*grid);
    const Eigen::VectorXd d = (-tau * detail::potential_at_nodes(*grid, v)).array().exp();
    const Eigen::VectorXd sw = w.array().sqrt();

    KernelMatrix out{grid, {}, t};
    if (opt.splitting == Splitting::strang) {
        const Eigen::VectorXd s = (d.array() * w.array()).sqrt();
        const Matrix m = s.asDiagonal() * h.values * s.asDiagonal();
        const Matrix p = detail::matrix_power(m, n, opt.threads);
        out.values = sw.cwiseInverse().asDiagonal() * p * sw.cwiseInverse().asDiagonal();
        out.values = 0.5 * (out.values + out.values.transpose()).eval();
    } else {
        const Matrix b = sw.asDiagonal() * h.values * (d.array() * sw.array()).matrix().asDiagonal();
        const Matrix p = detail::matrix_power(b, n, opt.threads);
        out.values = sw.cwiseInverse().asDiagonal() * p * sw.cwiseInverse().asDiagonal();
    }
    return out;
}

struct SchrodingerOptions {
    double tol = 1e-3;
    std::size_t max_steps = 4096;
    double max_level = 1048576.0;
    Splitting splitting = Splitting::strang;
    unsigned threads = 1;
};

struct SchrodingerResult {
    KernelMatrix kernel;
    std::size_t steps = 0;
    double achieved_tol = 0.0;
    double truncation_level = std::numeric_limits<double>::infinity();
    std::vector<double> residual_trace;
};

namespace detail {

inline double weighted_sup_change(const Matrix& a, const Matrix& b) {
    const double scale = b.cwiseAbs().maxCoeff();
    const double diff = (a - b).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

inline SchrodingerResult converge_in_steps(const GridPtr& grid, const HeatKernelEvaluator& ev, const Potential& v,
                                           double t, const SchrodingerOptions& opt) {
    TrotterOptions topt{opt.splitting, 1e-6, opt.threads};
    // Start at the fewest steps whose heat step still leaves interior nodes for the mass check.
    std::size_t first = 1;
    while (interior_margin(t / static_cast<double>(first)) >= grid->radius() && first < opt.max_steps) first *= 2;
    SchrodingerResult res{trotter_kernel(grid, ev, v, t, first, topt), first, 0.0, v.truncation_level(), {}};
    if (v.constant_value() || v.is_zero()) return res;
    for (std::size_t n = 2 * first; n <= opt.max_steps; n *= 2) {
        KernelMatrix next = trotter_kernel(grid, ev, v, t, n, topt);
        const double change = weighted_sup_change(next.values, res.kernel.values);
        res.residual_trace.push_back(change);
        res.kernel = std::move(next);
        res.steps = n;
        res.achieved_tol = change;
        if (change < opt.tol) return res;
    }
    std::ostringstream msg;
    msg << "schrodinger_kernel: no convergence within " << opt.max_steps << " steps; residual trace:";
    for (double r : res.residual_trace) msg << ' ' << r;
    throw NumericError(msg.str());
}

} // namespace detail

/**
 * @brief k_t^V by doubling the Trotter step count until successive kernels agree to tol.
 *
 * Unbounded potentials go through truncations min(V, 2^j); each level must not
 * increase the kernel, and the level loop stops once two levels agree to tol.
 */
inline SchrodingerResult schrodinger_kernel(GridPtr grid, const HeatKernelEvaluator& ev, const Potential& v, double t,
                                            const SchrodingerOptions& opt = {}) {
    if (!(t > 0.0)) throw DomainError("schrodinger_kernel: t must be positive");
    v.check_integrable(ev.homogeneous_dimension());
    if (v.is_bounded()) return detail::converge_in_steps(grid, ev, v, t, opt);

    std::vector<double> trace;
    SchrodingerResult prev = detail::converge_in_steps(grid, ev, v.truncated(1.0), t, opt);
    for (double level = 2.0; level <= opt.max_level; level *= 2.0) {
        SchrodingerResult next = detail::converge_in_steps(grid, ev, v.truncated(level), t, opt);
        // Ordering between levels is exact only at a common step count.
        const Matrix below = next.steps == prev.steps
                                 ? prev.kernel.values
                                 : trotter_kernel(grid, ev, v.truncated(level / 2.0), t, next.steps,
                                                  {opt.splitting, 1e-6, opt.threads})
                                       .values;
        const double rise = (next.kernel.values - below).maxCoeff();
        if (rise > 1e-10 * std::max(1.0, below.cwiseAbs().maxCoeff()))
            throw ConsistencyError("schrodinger_kernel: kernel increased when the truncation level was raised");
        const double change = detail::weighted_sup_change(next.kernel.values, prev.kernel.values);
        trace.push_back(change);
        prev = std::move(next);
        if (change < opt.tol) {
            prev.residual_trace.insert(prev.residual_trace.begin(), trace.begin(), trace.end());
            return prev;
        }
    }
    std::ostringstream msg;
    msg << "schrodinger_kernel: truncation levels did not converge up to " << opt.max_level << "; level changes:";
    for (double r : trace) msg << ' ' << r;
    throw NumericError(msg.str());
}

/**
 * @brief Matrix-free Trotter chain: applies the n-step product to functions and
 * evaluates the last step exactly at arbitrary (off-grid) points.
 *
 * One step is u -> b . H_tau (w . a . u) with a = b = e^{-tau V / 2} for Strang
 * and a = e^{-tau V}, b = 1 for the left product.
 */
class TrotterChain {
public:
    TrotterChain(GridPtr grid, const HeatKernelEvaluator& ev, const Potential& v, double t, std::size_t n,
                 const TrotterOptions& opt = {})
        : grid_(std::move(grid)), ev_(&ev), v_(v), t_(t), n_(n), splitting_(opt.splitting), threads_(opt.threads) {
        if (!(t > 0.0)) throw DomainError("TrotterChain: t must be positive");
        if (n < 1) throw ValidationError("TrotterChain: n must be >= 1");
        tau_ = t / static_cast<double>(n);
        h_ = heat_matrix(grid_, ev, tau_, {opt.leak_tol, true, opt.threads}).values;
        w_ = detail::weight_vector(*grid_);
        const Eigen::VectorXd vn = detail::potential_at_nodes(*grid_, v_);
        pre_ = splitting_ == Splitting::strang ? (-0.5 * tau_ * vn).array().exp().matrix()
                                               : (-tau_ * vn).array().exp().matrix();
        post_ = splitting_ == Splitting::strang ? pre_ : Eigen::VectorXd::Ones(vn.size());
    }

    double time() const { return t_; }
    std::size_t steps() const { return n_; }
    const SpaceGrid& grid() const { return *grid_; }

    /// sum_j K(x, node_j) f(node_j) w_j for every x in xs.
    std::vector<double> apply(const Eigen::VectorXd& f, std::span<const Vector> xs) const {
        Matrix u = f;
        for (std::size_t s = 1; s < n_; ++s) u = step(u);
        const Matrix r = final_step(u, xs);
        return std::vector<double>(r.data(), r.data() + r.size());
    }

    std::vector<double> mass(std::span<const Vector> xs) const {
        return apply(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(grid_->size())), xs);
    }
    double mass(const Vector& x) const { return mass(std::span<const Vector>(&x, 1)).front(); }

    /// Strang kernel values K(x_a, y_b) and the masses at the y_b.
    struct Values {
        Matrix kernel;            // rows: xs, cols: ys
        std::vector<double> mass; // per y
    };

    Values kernel_values(std::span<const Vector> xs, std::span<const Vector> ys) const {
        if (splitting_ != Splitting::strang) throw ValidationError("TrotterChain: kernel values need the Strang splitting");
        const auto m = static_cast<Eigen::Index>(grid_->size());
        const auto cols = static_cast<Eigen::Index>(ys.size());
        // Column b starts as the first factor S(node, y_b) and runs n - 1 further steps.
        Matrix u(m, cols);
        for (Eigen::Index b = 0; b < cols; ++b) {
            const double pre_y = point_factor(ys[static_cast<std::size_t>(b)]);
            const Eigen::VectorXd row = heat_row(ys[static_cast<std::size_t>(b)], tau_);
            u.col(b) = post_.cwiseProduct(row) * pre_y;
        }
        Values out;
        if (n_ == 1) {
            out.kernel = Matrix(static_cast<Eigen::Index>(xs.size()), cols);
            for (std::size_t a = 0; a < xs.size(); ++a)
                for (Eigen::Index b = 0; b < cols; ++b)
                    out.kernel(static_cast<Eigen::Index>(a), b) = point_factor(xs[a]) *
                                                                  ev_->heat_kernel(xs[a], ys[static_cast<std::size_t>(b)], tau_) *
                                                                  point_factor(ys[static_cast<std::size_t>(b)]);
        } else {
            for (std::size_t s = 2; s < n_; ++s) u = step(u);
            out.kernel = final_step(u, xs);
            u = step(u);
        }
        for (Eigen::Index b = 0; b < cols; ++b) out.mass.push_back(u.col(b).dot(w_));
        return out;
    }

private:
    Matrix step(const Matrix& u) const {
        const Matrix scaled = (w_.cwiseProduct(pre_)).asDiagonal() * u;
        return post_.asDiagonal() * detail::blocked_product(h_, scaled, threads_);
    }

    double point_factor(const Vector& x) const {
        const double vx = v_(x);
        return splitting_ == Splitting::strang ? std::exp(-0.5 * tau_ * vx) : 1.0;
    }

    Eigen::VectorXd heat_row(const Vector& x, double tau) const {
        const auto m = static_cast<Eigen::Index>(grid_->size());
        Eigen::VectorXd row(m);
        for (Eigen::Index j = 0; j < m; ++j) row(j) = ev_->heat_kernel(x, grid_->node(static_cast<std::size_t>(j)), tau);
        return row;
    }

    Matrix final_step(const Matrix& u, std::span<const Vector> xs) const {
        Matrix out(static_cast<Eigen::Index>(xs.size()), u.cols());
        const Matrix scaled = (w_.cwiseProduct(pre_)).asDiagonal() * u;
        parallel_for(xs.size(), threads_, [&](std::size_t a) {
            const Eigen::VectorXd row = heat_row(xs[a], tau_);
            out.row(static_cast<Eigen::Index>(a)) = point_factor(xs[a]) * (row.transpose() * scaled);
        });
        return out;
    }

    GridPtr grid_;
    const HeatKernelEvaluator* ev_;
    Potential v_;
    double t_, tau_ = 0.0;
    std::size_t n_;
    Splitting splitting_;
    unsigned threads_;
    Matrix h_;
    Eigen::VectorXd w_, pre_, post_;
};

/// sum_j k_t^V(x, node_j) w_j via the Strang chain with n steps.
inline double mass(GridPtr grid, const HeatKernelEvaluator& ev, const Potential& v, double t, const Vector& x,
                   std::size_t n = 64, unsigned threads = 1) {
    return TrotterChain(std::move(grid), ev, v, t, n, {Splitting::strang, 1e-6, threads}).mass(x);
}

} // namespace dunkl

namespace dunkl {

struct DuhamelOptions {
    std::size_t steps = 64;
    int s_nodes = 32;
    unsigned threads = 1;
    /// Upper bound on the Trotter step; steps double until t / steps <= max_tau.
    double max_tau = 1.0 / 64.0;
};

/**
 * @brief Relative residual max|h_t - k_t - I| / max h_t of the perturbation identity
 * h_t(x,y) = k_t(x,y) + int_0^t int h_s(x,z) V(z) k_{t-s}(z,y) dw(z) ds
 * over nodes with |x|, |y| <= X/2.
 *
 * k_r for arbitrary r comes from the spectral decomposition of the symmetric
 * Strang step M = Q diag(lambda) Q^T: k_r = W^{-1/2} Q diag(lambda^{r/tau}) Q^T W^{-1/2}.
 * The s-integral uses Gauss-Legendre rules on [0, t/2] and [t/2, t].
 */
inline double duhamel_residual(GridPtr grid, const HeatKernelEvaluator& ev, const Potential& v, double t,
                               const DuhamelOptions& opt = {}) {
    if (!(t > 0.0)) throw DomainError("duhamel_residual: t must be positive");
    if (!v.is_bounded()) throw ValidationError("duhamel_residual: potential must be bounded");
    if (!(opt.max_tau > 0.0)) throw ValidationError("duhamel_residual: max_tau must be positive");
    const SpaceGrid& g = *grid;
    std::size_t steps = std::max<std::size_t>(opt.steps, 1);
    while (t / static_cast<double>(steps) > opt.max_tau) steps *= 2;
    const double tau = t / static_cast<double>(steps);
    const Eigen::VectorXd w = detail::weight_vector(g);
    const Eigen::VectorXd vn = detail::potential_at_nodes(g, v);
    const Eigen::VectorXd s = ((-tau * vn).array().exp() * w.array()).sqrt();
    const Matrix h_tau = heat_matrix(grid, ev, tau, {1e-6, true, opt.threads}).values;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.asDiagonal() * h_tau * s.asDiagonal());
    if (eig.info() != Eigen::Success) throw NumericError("duhamel_residual: eigensolver failed");
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    const Matrix& q = eig.eigenvectors();

    const auto win = g.window(0.5 * g.radius());
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < g.size(); ++j)
        if (vn(static_cast<Eigen::Index>(j)) > 0.0) support.push_back(j);
    const auto nw = static_cast<Eigen::Index>(win.size());
    const auto ns = static_cast<Eigen::Index>(support.size());

    Matrix q_win(nw, q.cols()), q_sup(ns, q.cols());
    Eigen::VectorXd isw_win(nw), isw_sup(ns), vw_sup(ns);
    for (Eigen::Index a = 0; a < nw; ++a) {
        const auto i = static_cast<Eigen::Index>(win[static_cast<std::size_t>(a)]);
        q_win.row(a) = q.row(i);
        isw_win(a) = 1.0 / std::sqrt(w(i));
    }
    for (Eigen::Index b = 0; b < ns; ++b) {
        const auto j = static_cast<Eigen::Index>(support[static_cast<std::size_t>(b)]);
        q_sup.row(b) = q.row(j);
        isw_sup(b) = 1.0 / std::sqrt(w(j));
        vw_sup(b) = vn(j) * w(j);
    }
    auto powered = [&](double r) { return lambda.array().pow(r / tau).matrix(); };

    const Matrix k_t = isw_win.asDiagonal() * (q_win * powered(t).asDiagonal() * q_win.transpose()) * isw_win.asDiagonal();
    Matrix integral = Matrix::Zero(nw, nw);
    if (ns > 0) {
        const auto rule = quadrature::gauss_legendre(opt.s_nodes);
        for (const auto& [lo, hi] : {std::pair{0.0, 0.5 * t}, std::pair{0.5 * t, t}}) {
            const auto r = quadrature::mapped(rule, lo, hi);
            for (std::size_t m = 0; m < r.nodes.size(); ++m) {
                const double sm = r.nodes[m];
                Matrix hs(nw, ns);
                parallel_for(static_cast<std::size_t>(nw), opt.threads, [&](std::size_t a) {
                    for (Eigen::Index b = 0; b < ns; ++b)
                        hs(static_cast<Eigen::Index>(a), b) = ev.heat_kernel(g.node(win[a]), g.node(support[static_cast<std::size_t>(b)]), sm);
                });
                const Matrix k_rest = isw_sup.asDiagonal() * (q_sup * powered(t - sm).asDiagonal() * q_win.transpose()) *
                                      isw_win.asDiagonal();
                integral.noalias() += r.weights[m] * (hs * vw_sup.asDiagonal() * k_rest);
            }
        }
    }
    Matrix h_t(nw, nw);
    for (Eigen::Index a = 0; a < nw; ++a)
        for (Eigen::Index b = 0; b <= a; ++b)
            h_t(a, b) = h_t(b, a) = ev.heat_kernel(g.node(win[static_cast<std::size_t>(a)]), g.node(win[static_cast<std::size_t>(b)]), t);
    return (h_t - k_t - integral).cwiseAbs().maxCoeff() / h_t.cwiseAbs().maxCoeff();
}

} // namespace dunkl

namespace dunkl {

/**
 * @brief Strang chain with a fixed step tau evaluated spectrally for any t >= 2 tau.
 *
 * With M = Q diag(lambda) Q^T the symmetric Strang step, the chain kernel with
 * exact end factors S_tau(x, .) at off-grid points is
 *   k_t(x, y) = sum_m lambda_m^{t/tau - 2} B_{m x} B_{m y},  B = Q^T W^{1/2} S_tau(., x),
 * and its mass is sum_m lambda_m^{t/tau - 1} B_{m x} (Q^T W^{1/2} 1)_m.
 * One eigendecomposition serves every t.
 */
class SpectralStrangChain {
public:
    SpectralStrangChain(GridPtr grid, const HeatKernelEvaluator& ev, const Potential& v, double tau,
                        std::span<const Vector> points, unsigned threads = 1)
        : grid_(std::move(grid)), tau_(tau), points_(points.begin(), points.end()) {
        if (!(tau > 0.0)) throw DomainError("SpectralStrangChain: tau must be positive");
        const SpaceGrid& g = *grid_;
        const Eigen::VectorXd w = detail::weight_vector(g);
        const Eigen::VectorXd half = (-0.5 * tau * detail::potential_at_nodes(g, v)).array().exp();
        const Eigen::VectorXd s = half.cwiseProduct(w.cwiseSqrt());
        const Matrix h = heat_matrix(grid_, ev, tau, {1e-6, true, threads}).values;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s.asDiagonal() * h * s.asDiagonal());
        if (eig.info() != Eigen::Success) throw NumericError("SpectralStrangChain: eigensolver failed");
        lambda_ = eig.eigenvalues().cwiseMax(0.0);

        const auto m = static_cast<Eigen::Index>(g.size());
        const auto np = static_cast<Eigen::Index>(points_.size());
        Matrix ends(m, np);  // W^{1/2} S_tau(node, x)
        parallel_for(points_.size(), threads, [&](std::size_t a) {
            const double fx = std::exp(-0.5 * tau * v(points_[a]));
            for (Eigen::Index j = 0; j < m; ++j)
                ends(j, static_cast<Eigen::Index>(a)) =
                    s(j) * ev.heat_kernel(points_[a], g.node(static_cast<std::size_t>(j)), tau) * fx;
        });
        b_ = eig.eigenvectors().transpose() * ends;
        ones_ = eig.eigenvectors().transpose() * w.cwiseSqrt();
    }

    double tau() const { return tau_; }
    std::span<const Vector> points() const { return points_; }

    /// k_t(points_a, points_b).
    Matrix kernel(double t) const {
        const Eigen::VectorXd p = powers(t, 2.0);
        return b_.transpose() * p.asDiagonal() * b_;
    }

    /// sum_j k_t(points_a, node_j) w_j.
    std::vector<double> mass(double t) const {
        const Eigen::VectorXd p = powers(t, 1.0);
        const Eigen::VectorXd out = b_.transpose() * p.cwiseProduct(ones_);
        return {out.data(), out.data() + out.size()};
    }

private:
    Eigen::VectorXd powers(double t, double end_steps) const {
        const double e = t / tau_ - end_steps;
        if (e < -1e-9) throw DomainError("SpectralStrangChain: t must be at least 2 tau");
        return lambda_.array().pow(std::max(0.0, e)).matrix();
    }

    GridPtr grid_;
    double tau_;
    std::vector<Vector> points_;
    Eigen::VectorXd lambda_, ones_;
    Matrix b_;
};

} // namespace dunkl

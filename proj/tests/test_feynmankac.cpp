#include "dunkl/feynmankac.hpp"
#include "dunkl/schrodinger.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace dunkl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kK = 1.5;

const HeatKernelEvaluator& evaluator() {
    static const HeatKernelEvaluator ev(ProductRank1System(std::vector<double>{kK}));
    return ev;
}

// Transition density y -> h_s(x, y) 2^k |y|^{2k}, written out directly.
double density(double x, double y, double s) {
    return evaluator().heat_kernel_1d(0, x, y, s) * std::pow(2.0, kK) * std::pow(std::abs(y), 2.0 * kK);
}

// CDF of the transition density on a uniform grid over [-L, L] (0 is a grid point).
struct CdfOracle {
    std::vector<double> y, cdf;
};

CdfOracle cdf_oracle(double x, double s, double half_width, std::size_t cells) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    CdfOracle o;
    o.y.resize(cells + 1);
    o.cdf.assign(cells + 1, 0.0);
    const double h = 2.0 * half_width / static_cast<double>(cells);
    for (std::size_t i = 0; i <= cells; ++i) o.y[i] = -half_width + h * static_cast<double>(i);
    o.y[cells / 2] = 0.0;
    for (std::size_t i = 0; i < cells; ++i)
        o.cdf[i + 1] = o.cdf[i] + GK::integrate([&](double u) { return density(x, u, s); }, o.y[i], o.y[i + 1], 0, 0);
    return o;
}

double ks_distance(std::vector<double> samples, const CdfOracle& o) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < o.y.size(); ++i) {
        const auto below = std::upper_bound(samples.begin(), samples.end(), o.y[i]) - samples.begin();
        worst = std::max(worst, std::abs(static_cast<double>(below) / n - o.cdf[i]));
    }
    return worst;
}

double mean(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

double standard_error(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double a : v) s += (a - m) * (a - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::vector<double> draws(const TransitionSampler& sampler, double x, std::size_t count, std::uint64_t seed) {
    std::vector<double> out(count);
    for (std::size_t p = 0; p < count; ++p) {
        auto rng = path_rng(seed, p);
        out[p] = sample_transition(sampler, make_vector({x}), rng)(0);
    }
    return out;
}

double indicator(const Vector& y, double r) { return y.norm() < r ? 1.0 : 0.0; }

CadlagPath random_path(std::mt19937_64& rng, std::size_t jumps) {
    std::uniform_real_distribution<double> t(0.0, 1.0), v(-2.0, 2.0);
    std::vector<double> breaks(jumps), values(jumps + 1);
    for (double& b : breaks) b = t(rng);
    std::sort(breaks.begin(), breaks.end());
    for (double& a : values) a = v(rng);
    return CadlagPath(0.0, 1.0, breaks, values);
}

} // namespace

TEST_CASE("transition tables are valid CDFs", "[feynmankac][sampler]") {
    const TransitionSampler sampler(evaluator(), 0.5);
    for (double x : {0.0, 0.8, -2.3}) {
        const auto tab = sampler.table(0, x);
        CHECK(std::is_sorted(tab->cdf.begin(), tab->cdf.end()));
        CHECK(tab->cdf.front() == 0.0);
        CHECK_THAT(tab->cdf.back(), WithinAbs(1.0, 1e-9));
        CHECK(tab->clip_mass <= 1e-6);
        CHECK(tab->knots.size() == 4097);
        CHECK(std::find(tab->knots.begin(), tab->knots.end(), 0.0) != tab->knots.end());
    }
    CHECK(sampler.table(0, 0.8) == sampler.table(0, 0.8));
}

TEST_CASE("oracle CDF integrates to one", "[feynmankac][oracle]") {
    for (double x : {0.0, 0.8}) CHECK_THAT(cdf_oracle(x, 0.5, 10.0, 2000).cdf.back(), WithinAbs(1.0, 1e-9));
}

TEST_CASE("sampled transitions match the density", "[feynmankac][sampler]") {
    const double s = 0.5;
    const TransitionSampler sampler(evaluator(), s);
    SECTION("symmetric mean from the origin") {
        const auto d = draws(sampler, 0.0, 100000, 1);
        CHECK(std::abs(mean(d)) <= 3.0 * standard_error(d));
        CHECK(ks_distance(d, cdf_oracle(0.0, s, 10.0, 8000)) <= 0.01);
    }
    SECTION("second moment and KS distance away from the origin") {
        using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
        const double x = 0.8;
        const auto d = draws(sampler, x, 100000, 2);
        double exact = 0.0;
        for (auto [a, b] : {std::pair{-10.0, 0.0}, std::pair{0.0, 10.0}})
            exact += GK::integrate([&](double y) { return y * y * density(x, y, s); }, a, b, 15, 1e-12);
        std::vector<double> sq(d.size());
        std::transform(d.begin(), d.end(), sq.begin(), [](double y) { return y * y; });
        CHECK(std::abs(mean(sq) - exact) <= 3.0 * standard_error(sq));
        CHECK(ks_distance(d, cdf_oracle(x, s, 10.0, 8000)) <= 0.01);
    }
}

TEST_CASE("sampler reports a clipped domain", "[feynmankac][sampler]") {
    const TransitionSampler tight(evaluator(), 1.0, {2.0, 256});
    auto rng = path_rng(3, 0);
    CHECK_THROWS_AS(sample_transition(tight, make_vector({0.0}), rng), DomainError);
    try {
        sample_transition(tight, make_vector({0.0}), rng);
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("domain too small") != std::string::npos);
    }
    CHECK_THROWS_AS(TransitionSampler(evaluator(), 0.0), DomainError);
    CHECK_THROWS_AS(TransitionSampler(evaluator(), 1.0, {12.0, 15}), ValidationError);
}

TEST_CASE("chain marginal follows the semigroup", "[feynmankac][path]") {
    const double t = 1.0, x = 0.8;
    const std::size_t n = 4, paths = 10000;
    const TransitionSampler sampler(evaluator(), t / static_cast<double>(n));
    std::vector<double> last(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        auto rng = path_rng(4, p);
        const auto path = sample_path(sampler, make_vector({x}), t, n, rng);
        REQUIRE(path.times.size() == n + 1);
        REQUIRE(path.states.size() == n + 1);
        CHECK(path.states.front()(0) == x);
        CHECK(path.times.back() == t);
        for (const auto& s : path.states) REQUIRE(std::abs(s(0)) <= sampler.radius());
        last[p] = path.states.back()(0);
    }
    CHECK(ks_distance(last, cdf_oracle(x, t, 10.0, 8000)) <= 0.02);

    // n = 1 is one transition draw from the same stream.
    const TransitionSampler one(evaluator(), t);
    auto r1 = path_rng(5, 0), r2 = path_rng(5, 0);
    const auto single = sample_path(one, make_vector({x}), t, 1, r1);
    CHECK(single.states.back()(0) == sample_transition(one, make_vector({x}), r2)(0));
    CHECK_THROWS_AS(sample_path(one, make_vector({x}), t, 2, r1), ValidationError);
    CHECK_THROWS_AS(sample_path(one, make_vector({x}), t, 0, r1), ValidationError);
}

TEST_CASE("Feynman-Kac trivial potentials", "[feynmankac][fk]") {
    const auto one = [](const Vector&) { return 1.0; };
    const Vector x = make_vector({0.3});
    const auto zero = fk_estimate(evaluator(), Potential::constant(0.0), one, x, 1.0, 16, 200, 7);
    CHECK(zero.mean == 1.0);
    CHECK(zero.standard_error == 0.0);
    CHECK(zero.n_paths == 200);
    CHECK(zero.n_steps == 16);
    CHECK(zero.seed == 7);
    const auto lam = fk_estimate(evaluator(), Potential::constant(0.5), one, x, 1.0, 64, 100, 7);
    CHECK(lam.mean == std::exp(-0.5));
    CHECK(lam.standard_error == 0.0);
    CHECK_THROWS_AS(fk_estimate(evaluator(), Potential::constant(0.0), one, x, 1.0, 16, 1, 7), ValidationError);
    CHECK_THROWS_AS(fk_estimate(evaluator(), Potential::constant(0.0), one, x, 0.0, 16, 10, 7), DomainError);
    CHECK_THROWS_AS(fk_estimate(evaluator(), Potential::radial_power(1.0, 1.0), one, x, 1.0, 16, 10, 7), ValidationError);
}

TEST_CASE("Feynman-Kac estimate is deterministic across threads", "[feynmankac][fk]") {
    const auto f = [](const Vector& y) { return indicator(y, 2.0); };
    const auto v = Potential::ball_indicator(make_vector({0.0}), 1.0);
    const Vector x = make_vector({0.0});
    const auto a = fk_estimate(evaluator(), v, f, x, 1.0, 16, 2000, 11, {{}, 1});
    const auto b = fk_estimate(evaluator(), v, f, x, 1.0, 16, 2000, 11, {{}, 4});
    const auto c = fk_estimate(evaluator(), v, f, x, 1.0, 16, 2000, 11, {{}, 1});
    const auto d = fk_estimate(evaluator(), v, f, x, 1.0, 16, 2000, 12, {{}, 1});
    CHECK(a.mean == b.mean);
    CHECK(a.standard_error == b.standard_error);
    CHECK(a.mean == c.mean);
    CHECK(a.mean != d.mean);
}

TEST_CASE("Feynman-Kac agrees with the Trotter chain", "[feynmankac][fk][property]") {
    const double t = 1.0;
    const std::size_t n = 64;
    const auto v = Potential::ball_indicator(make_vector({0.0}), 1.0);
    const auto f = [](const Vector& y) { return indicator(y, 2.0); };
    const Vector x = make_vector({0.0});
    const auto est = fk_estimate(evaluator(), v, f, x, t, n, 20000, 2024);

    // Same discrete product: H D (W H D)^{n-1} applied to f.
    const auto grid = std::make_shared<const SpaceGrid>(SpaceGrid::line(kK, 12.0, 512, std::vector<double>{-2.0, -1.0, 1.0, 2.0}));
    Eigen::VectorXd fn(static_cast<Eigen::Index>(grid->size()));
    for (std::size_t j = 0; j < grid->size(); ++j) fn(static_cast<Eigen::Index>(j)) = f(grid->node(j));
    const TrotterChain chain(grid, evaluator(), v, t, n, {Splitting::left});
    const double oracle = chain.apply(fn, std::span<const Vector>(&x, 1)).front();
    INFO("FK " << est.mean << " +- " << est.standard_error << ", Trotter " << oracle);
    CHECK(est.standard_error > 0.0);
    CHECK(std::abs(est.mean - oracle) <= 3.0 * est.standard_error);
}

TEST_CASE("Riemann sums of cadlag paths", "[feynmankac][riemann]") {
    SECTION("constant") {
        for (std::size_t n : {1u, 3u, 7u, 64u})
            CHECK(riemann_sum([](double) { return 0.75; }, -1.0, 3.0, n) == 3.0);
    }
    SECTION("single jump") {
        const CadlagPath step(0.0, 2.0, {0.7}, {1.0, -0.5});
        CHECK(step(0.7) == -0.5);
        CHECK(step(0.6999) == 1.0);
        CHECK_THAT(step.integral(), WithinAbs(0.7 - 0.65, 1e-15));
        for (std::size_t n = 1; n <= 200; ++n) {
            const auto r = riemann_sum(step, n);
            CHECK(r.error() <= 2.0 / static_cast<double>(n) * 1.5 + 1e-14);
        }
    }
    SECTION("random ten-jump paths converge at rate 1/n") {
        std::mt19937_64 rng(31);
        std::vector<CadlagPath> paths;
        for (int i = 0; i < 32; ++i) paths.push_back(random_path(rng, 10));
        std::vector<double> log_n, log_err;
        for (int e = 4; e <= 12; ++e) {
            const std::size_t n = std::size_t{1} << e;
            double total = 0.0;
            for (const auto& p : paths) {
                const auto r = riemann_sum(p, n);
                double jumps = 0.0;
                for (std::size_t i = 0; i < p.breaks().size(); ++i) jumps += p.jump(i);
                CHECK(r.error() <= jumps / static_cast<double>(n) + 1e-12);
                total += r.error();
            }
            log_n.push_back(std::log(static_cast<double>(n)));
            log_err.push_back(std::log(total / static_cast<double>(paths.size())));
        }
        const double mx = mean(log_n), my = mean(log_err);
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            sxy += (log_n[i] - mx) * (log_err[i] - my);
            sxx += (log_n[i] - mx) * (log_n[i] - mx);
        }
        const double slope = sxy / sxx;
        INFO("fitted slope " << slope);
        CHECK(std::abs(slope + 1.0) <= 0.15);
    }
    CHECK_THROWS_AS(riemann_sum([](double) { return 1.0; }, 1.0, 1.0, 4), ValidationError);
    CHECK_THROWS_AS(riemann_sum([](double) { return 1.0; }, 0.0, 1.0, 0), ValidationError);
}

TEST_CASE("cadlag path validation and jump sets", "[feynmankac][riemann]") {
    CHECK_THROWS_AS(CadlagPath(1.0, 0.0, {}, {1.0}), ValidationError);
    CHECK_THROWS_AS(CadlagPath(0.0, 1.0, {0.5}, {1.0}), ValidationError);
    CHECK_THROWS_AS(CadlagPath(0.0, 1.0, {0.6, 0.4}, {1.0, 2.0, 3.0}), ValidationError);
    CHECK_THROWS_AS(CadlagPath(0.0, 1.0, {1.0}, {1.0, 2.0}), ValidationError);

    const CadlagPath p(0.0, 1.0, {0.1, 0.3, 0.5, 0.7}, {0.0, 1.0, 1.0, 0.25, 2.25});
    CHECK(jump_points(p, 5.0).empty());
    CHECK(jump_points(p, 1e-300) == std::vector<double>{0.1, 0.5, 0.7});
    CHECK(jump_points(p, 0.75) == std::vector<double>{0.1, 0.5, 0.7});
    CHECK(jump_points(p, 1.0) == std::vector<double>{0.1, 0.7});
    CHECK(jump_points(p, 1.5) == std::vector<double>{0.7});
    CHECK_THROWS_AS(jump_points(p, 0.0), ValidationError);
}

#include "dunkl/rootsystems.hpp"

#include <catch_amalgamated.hpp>

#include <deque>
#include <map>
#include <random>

using namespace dunkl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RootSystem rank1(double k) { return RootSystem::product_z2(std::vector<double>{k}); }
RootSystem z2z2() { return RootSystem::product_z2(std::vector<double>{1.0, 0.5}); }

Vector random_point(std::mt19937_64& rng, std::size_t dim, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
    return v;
}

// Rank one: both roots induce the same reflection, so every length-m sequence
// follows the path y, -y, y, ... and there are 2^m of them.
double rank1_lambda_oracle(double x, double y, double t, std::size_t max_len) {
    double total = 0.0, product = 1.0, state = y;
    for (std::size_t m = 0; m <= max_len; ++m) {
        if (x * state >= 0.0) total += std::pow(2.0, static_cast<double>(m)) * product;
        const double base = 1.0 + std::abs(x - state) / std::sqrt(t);
        product /= base * base;
        state = -state;
    }
    return total;
}

// Breadth-first search over reflections, independent of OrbitGraph.
std::size_t bfs_reflection_count(const RootSystem& system, const Vector& x, const Vector& y) {
    std::deque<std::pair<Vector, std::size_t>> queue{{y, 0}};
    std::vector<Vector> seen{y};
    while (!queue.empty()) {
        auto [v, d] = queue.front();
        queue.pop_front();
        if (chamber_equivalent(system, x, v)) return d;
        for (const auto& a : system.roots()) {
            Vector w = reflect(a, v);
            bool known = false;
            for (const auto& s : seen) known = known || (s - w).cwiseAbs().maxCoeff() < 1e-9;
            if (!known) {
                seen.push_back(w);
                queue.emplace_back(w, d + 1);
            }
        }
    }
    throw std::logic_error("unreachable chamber");
}

} // namespace

TEST_CASE("root systems validate normalization and closure", "[rootsystems]") {
    REQUIRE_THROWS_AS(RootSystem({make_vector({1.0}), make_vector({-1.0})}, {1.0, 1.0}), ValidationError);
    REQUIRE_THROWS_AS(RootSystem({make_vector({std::sqrt(2.0)})}, {1.0}), ValidationError);
    REQUIRE_THROWS_AS(RootSystem::dihedral(3, 1.0, 2.0), ValidationError);
    REQUIRE_NOTHROW(RootSystem::dihedral(4, 1.0, 2.0));
}

TEST_CASE("group orders of the standard families", "[rootsystems]") {
    CHECK(build_group(rank1(1.0)).order() == 2);
    CHECK(build_group(z2z2()).order() == 4);
    CHECK(build_group(RootSystem::dihedral(3, 1.0, 1.0)).order() == 6);
    CHECK(build_group(RootSystem::dihedral(4, 1.0, 0.5)).order() == 8);
}

TEST_CASE("group is closed under composition", "[rootsystems]") {
    for (const auto& system : {z2z2(), RootSystem::dihedral(3, 1.0, 1.0), RootSystem::dihedral(6, 1.0, 2.0)}) {
        const auto group = build_group(system);
        for (const auto& a : group.elements())
            for (const auto& b : group.elements()) CHECK(group.find(a.matrix * b.matrix).has_value());
    }
}

TEST_CASE("rho of a single flip walk", "[rootsystems]") {
    const auto system = rank1(1.0);
    const OrbitWalk walk(system, make_vector({2.0}), {0, 0});
    // States 2, -2, 2; the last state is excluded: (1+1)^-2 (1+3)^-2.
    CHECK_THAT(rho(walk, make_vector({1.0}), 1.0), WithinRel(1.0 / 64.0, 1e-15));
    CHECK(rho(OrbitWalk(system, make_vector({2.0}), {}), make_vector({1.0}), 1.0) == 1.0);
    CHECK_THROWS_AS(rho(walk, make_vector({1.0}), 0.0), DomainError);
}

TEST_CASE("rho is non-decreasing in t", "[rootsystems][property]") {
    const auto system = RootSystem::dihedral(3, 1.0, 1.0);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const OrbitWalk walk(system, random_point(rng, 2, 3.0), {static_cast<std::size_t>(trial % 6), 2, 5});
        const Vector x = random_point(rng, 2, 3.0);
        CHECK(rho(walk, x, 0.5) <= rho(walk, x, 1.0));
    }
}

TEST_CASE("lambda reference values in rank one", "[rootsystems]") {
    const auto system = rank1(1.0);
    const auto group = build_group(system);
    for (auto method : {LambdaMethod::naive, LambdaMethod::dp}) {
        CHECK_THAT(lambda(system, group, make_vector({1.0}), make_vector({2.0}), 1.0, 4, method),
                   WithinRel(1.06640625, 1e-15));
        CHECK_THAT(lambda(system, group, make_vector({0.0}), make_vector({0.0}), 3.7, 4, method), WithinRel(31.0, 1e-15));
    }
}

TEST_CASE("rank-one lambda matches the alternating-path oracle", "[rootsystems]") {
    const auto system = rank1(0.7);
    const auto group = build_group(system);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0), lt(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double x = u(rng), y = u(rng), t = std::exp(lt(rng));
        for (auto range : {LambdaRange::reduced, LambdaRange::full}) {
            const auto len = lambda_max_length(group, range);
            CHECK_THAT(lambda(system, group, make_vector({x}), make_vector({y}), t, range),
                       WithinRel(rank1_lambda_oracle(x, y, t, len), 1e-13));
        }
    }
}

TEST_CASE("same chamber gives lambda at least one", "[rootsystems][property]") {
    const auto system = RootSystem::dihedral(3, 1.0, 1.0);
    const auto group = build_group(system);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        const Vector x = random_point(rng, 2, 2.0);
        const Vector y = x * 0.5;
        CHECK(lambda(system, group, x, y, 1.0, LambdaRange::reduced) >= 1.0);
    }
}

TEST_CASE("naive enumeration respects its budget", "[rootsystems]") {
    const auto system = RootSystem::dihedral(3, 1.0, 1.0);
    const auto group = build_group(system);
    // 6^12 sequences exceed the 1e7 budget; 6^6 do not.
    CHECK_THROWS_AS(lambda(system, group, make_vector({1.0, 0.2}), make_vector({0.3, 1.0}), 1.0, LambdaRange::full,
                           LambdaMethod::naive),
                    BudgetError);
    CHECK_NOTHROW(lambda(system, group, make_vector({1.0, 0.2}), make_vector({0.3, 1.0}), 1.0, LambdaRange::reduced,
                         LambdaMethod::naive));
}

TEST_CASE("reflection count examples", "[rootsystems]") {
    const auto r1 = rank1(1.0);
    CHECK(reflection_count(r1, build_group(r1), make_vector({1.0}), make_vector({-2.0})) == 1);
    CHECK(reflection_count(r1, build_group(r1), make_vector({1.0}), make_vector({2.0})) == 0);
    const auto z = z2z2();
    CHECK(reflection_count(z, build_group(z), make_vector({1.0, 1.0}), make_vector({-1.0, -1.0})) == 2);
}

TEST_CASE("reflection count matches breadth-first search", "[rootsystems][property]") {
    std::mt19937_64 rng(5);
    for (const auto& system : {z2z2(), RootSystem::dihedral(3, 1.0, 1.0), RootSystem::dihedral(4, 1.0, 2.0)}) {
        const auto group = build_group(system);
        for (int i = 0; i < 40; ++i) {
            const Vector x = random_point(rng, 2, 3.0), y = random_point(rng, 2, 3.0);
            const auto n = reflection_count(system, group, x, y);
            CHECK(n == bfs_reflection_count(system, x, y));
            CHECK((n == 0) == chamber_equivalent(system, x, y));
        }
    }
}

TEST_CASE("orbit distance is a symmetric invariant metric", "[rootsystems][property]") {
    std::mt19937_64 rng(9);
    for (const auto& system : {z2z2(), RootSystem::dihedral(3, 1.0, 1.0), RootSystem::dihedral(5, 1.0, 1.0)}) {
        const auto group = build_group(system);
        for (int i = 0; i < 50; ++i) {
            const Vector x = random_point(rng, 2, 4.0), y = random_point(rng, 2, 4.0), z = random_point(rng, 2, 4.0);
            const double d = orbit_distance(group, x, y);
            CHECK_THAT(orbit_distance(group, y, x), WithinAbs(d, 1e-12));
            for (const auto& g : group.elements()) CHECK_THAT(orbit_distance(group, x, g.matrix * y), WithinAbs(d, 1e-12));
            CHECK(orbit_distance(group, x, z) <= d + orbit_distance(group, y, z) + 1e-12);
            CHECK(d <= (x - y).norm() + 1e-12);
            CHECK_NOTHROW(chamber_equivalent_checked(system, group, x, y));
        }
    }
}

TEST_CASE("lambda sandwich, scaling and dual-method agreement", "[rootsystems][property]") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> lt(-2.0, 2.0), lc(0.0, 1.5);
    for (const auto& system : {z2z2(), RootSystem::dihedral(3, 1.0, 1.0)}) {
        const auto group = build_group(system);
        const double order = static_cast<double>(group.order());
        const double reduction = std::pow(static_cast<double>(system.size()), 2.0 * order);
        const bool naive_full = std::pow(static_cast<double>(system.size()), 2.0 * order) <= kNaiveLambdaBudget;
        for (int i = 0; i < 40; ++i) {
            const Vector x = random_point(rng, 2, 3.0), y = random_point(rng, 2, 3.0);
            const double t = std::exp(lt(rng)), c = std::exp(lc(rng));
            const double full = lambda(system, group, x, y, t, LambdaRange::full);
            const double reduced = lambda(system, group, x, y, t, LambdaRange::reduced);
            CHECK(reduced <= full * (1 + 1e-14));
            CHECK(full <= reduction * reduced);
            const double scaled = lambda(system, group, x, y, c * t, LambdaRange::full);
            CHECK(std::pow(c, -2.0 * order) * scaled <= full * (1 + 1e-12));
            CHECK(full <= scaled * (1 + 1e-12));
            CHECK_THAT(lambda(system, group, x, y, t, LambdaRange::reduced, LambdaMethod::naive), WithinRel(reduced, 1e-12));
            if (naive_full)
                CHECK_THAT(lambda(system, group, x, y, t, LambdaRange::full, LambdaMethod::naive), WithinRel(full, 1e-12));
        }
    }
}
